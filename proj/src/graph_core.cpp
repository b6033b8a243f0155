#include "relgraph/graph_core.hpp"

#include "relgraph/error.hpp"

#include <bit>
#include <cmath>
#include <deque>
#include <string>

namespace relgraph {

void check_dense_graph(const DenseGraph& g) {
    if (g.weights.rows() != g.weights.cols()) {
        throw Error(ErrorKind::InvalidArgument, "adjacency must be square");
    }
    for (Eigen::Index i = 0; i < g.weights.size(); ++i) {
        const double w = g.weights.data()[i];
        if (!std::isfinite(w)) throw Error(ErrorKind::NonFiniteInput, "non-finite adjacency weight");
        if (w < 0.0) throw Error(ErrorKind::InvalidArgument, "negative adjacency weight");
    }
    if (g.row_normalized) {
        for (Eigen::Index i = 0; i < g.weights.rows(); ++i) {
            if (std::abs(g.weights.row(i).sum() - 1.0) > 1e-6) {
                throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(i) + " is not normalized");
            }
        }
    }
}

// ---------------------------------------------------------------------------

BinaryGraph::BinaryGraph(std::size_t n) : n_(n), words_((n + 63) / 64), rows_(n * words_, 0) {}

void BinaryGraph::add_edge(std::size_t i, std::size_t j) {
    if (i == j) return;
    rows_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64);
    rows_[j * words_ + i / 64] |= std::uint64_t{1} << (i % 64);
}

std::size_t BinaryGraph::degree(std::size_t i) const {
    std::size_t k = 0;
    for (auto word : row_bits(i)) k += static_cast<std::size_t>(std::popcount(word));
    return k;
}

std::size_t BinaryGraph::edge_count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < n_; ++i) total += degree(i);
    return total / 2;
}

std::vector<std::size_t> BinaryGraph::neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    const auto bits = row_bits(i);
    for (std::size_t w = 0; w < bits.size(); ++w) {
        auto word = bits[w];
        while (word) {
            out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
            word &= word - 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

DenseGraph row_normalize_scaled(const Matrix& raw, int scale_dim, NodeKind kind) {
    if (scale_dim < 1) throw Error(ErrorKind::InvalidArgument, "scale_dim must be >= 1");
    if (raw.rows() != raw.cols()) throw Error(ErrorKind::InvalidArgument, "raw weights must be square");
    if (!raw.allFinite()) throw Error(ErrorKind::NonFiniteInput, "raw weights contain inf/nan");

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    DenseGraph g;
    g.node_kind = kind;
    g.row_normalized = true;
    g.weights.resize(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const double row_max = raw.row(i).maxCoeff() * inv_scale;
        double sum = 0.0;
        for (Eigen::Index j = 0; j < raw.cols(); ++j) {
            const double e = std::exp(raw(i, j) * inv_scale - row_max);
            g.weights(i, j) = e;
            sum += e;
        }
        g.weights.row(i) /= sum;
    }
    return g;
}

BinaryGraph threshold_binarize(const DenseGraph& g, double tau, SymmetrizeRule rule) {
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be > 0");
    const std::size_t n = g.n();
    BinaryGraph out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = g.weights(i, j);
            const double b = g.weights(j, i);
            const double s = rule == SymmetrizeRule::Max ? std::max(a, b) : 0.5 * (a + b);
            if (s > tau) out.add_edge(i, j);
        }
    }
    return out;
}

double clustering_coefficient(const BinaryGraph& g) {
    const std::size_t n = g.n();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "clustering needs n >= 1");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto nbrs = g.neighbors(i);
        const std::size_t k = nbrs.size();
        if (k < 2) continue;
        // Each edge among the neighbours of i is seen twice.
        std::size_t twice_triangles = 0;
        const auto row_i = g.row_bits(i);
        for (auto j : nbrs) {
            const auto row_j = g.row_bits(j);
            for (std::size_t w = 0; w < row_i.size(); ++w) {
                twice_triangles += static_cast<std::size_t>(std::popcount(row_i[w] & row_j[w]));
            }
        }
        total += static_cast<double>(twice_triangles) / static_cast<double>(k * (k - 1));
    }
    return total / static_cast<double>(n);
}

PathLength average_path_length(const BinaryGraph& g) {
    const std::size_t n = g.n();
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "path length needs n >= 2");

    std::vector<std::vector<std::uint32_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto j : g.neighbors(i)) adj[i].push_back(static_cast<std::uint32_t>(j));
    }

    // Integer accumulation keeps the result independent of traversal order.
    std::uint64_t distance_sum = 0;
    std::uint64_t connected = 0;
    std::vector<std::uint32_t> dist(n);
    std::vector<std::uint32_t> queue(n);
    constexpr auto unseen = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), unseen);
        dist[s] = 0;
        std::size_t head = 0, tail = 0;
        queue[tail++] = static_cast<std::uint32_t>(s);
        while (head < tail) {
            const auto u = queue[head++];
            for (auto v : adj[u]) {
                if (dist[v] != unseen) continue;
                dist[v] = dist[u] + 1;
                distance_sum += dist[v];
                ++connected;
                queue[tail++] = v;
            }
        }
    }

    PathLength out;
    const auto ordered_pairs = static_cast<double>(n) * static_cast<double>(n - 1);
    out.connected_pair_fraction = static_cast<double>(connected) / ordered_pairs;
    if (connected > 0) out.mean = static_cast<double>(distance_sum) / static_cast<double>(connected);
    return out;
}

GraphMeasures measure_binary(const BinaryGraph& g) {
    GraphMeasures m;
    m.clustering = clustering_coefficient(g);
    const auto pl = average_path_length(g);
    m.path_length = pl.mean;
    m.connected_pair_fraction = pl.connected_pair_fraction;
    return m;
}

GraphMeasures graph_measures(const DenseGraph& g, std::optional<double> tau, SymmetrizeRule rule) {
    return measure_binary(threshold_binarize(g, tau.value_or(auto_threshold(g.n())), rule));
}

DenseGraph diagonal_concat(std::span<const DenseGraph> graphs) {
    if (graphs.empty()) throw Error(ErrorKind::EmptyList, "diagonal_concat needs at least one graph");
    Eigen::Index total = 0;
    for (const auto& g : graphs) total += g.weights.rows();

    DenseGraph out;
    out.node_kind = graphs.front().node_kind;
    out.row_normalized = true;
    out.weights = Matrix::Zero(total, total);
    Eigen::Index offset = 0;
    for (const auto& g : graphs) {
        const auto n = g.weights.rows();
        out.weights.block(offset, offset, n, n) = g.weights;
        out.row_normalized = out.row_normalized && g.row_normalized;
        offset += n;
    }
    return out;
}

} // namespace relgraph
