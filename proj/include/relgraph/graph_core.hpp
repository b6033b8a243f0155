#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace relgraph {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class NodeKind { Token, Channel, Biological };

/// Weighted directed adjacency. Row i holds the weights node i aggregates
/// from every source node j.
struct DenseGraph {
    Matrix weights;
    NodeKind node_kind = NodeKind::Token;
    bool row_normalized = false;

    std::size_t n() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Throws NonFiniteInput / InvalidArgument when the DenseGraph invariants do not hold.
void check_dense_graph(const DenseGraph& g);

/// Symmetric, loop-free, unweighted graph stored as packed bit rows.
class BinaryGraph {
public:
    BinaryGraph() = default;
    explicit BinaryGraph(std::size_t n);

    std::size_t n() const { return n_; }
    bool has_edge(std::size_t i, std::size_t j) const {
        return (rows_[i * words_ + j / 64] >> (j % 64)) & 1u;
    }
    /// Adds the undirected edge {i, j}; self-loops are ignored.
    void add_edge(std::size_t i, std::size_t j);

    std::size_t degree(std::size_t i) const;
    std::size_t edge_count() const;
    std::vector<std::size_t> neighbors(std::size_t i) const;
    std::span<const std::uint64_t> row_bits(std::size_t i) const {
        return {rows_.data() + i * words_, words_};
    }

    bool operator==(const BinaryGraph&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> rows_;
};

struct GraphMeasures {
    double clustering = 0.0;
    // +inf when no ordered pair is connected.
    double path_length = std::numeric_limits<double>::infinity();
    double connected_pair_fraction = 0.0;

    bool path_length_finite() const { return path_length != std::numeric_limits<double>::infinity(); }
};

struct PathLength {
    double mean = std::numeric_limits<double>::infinity();
    double connected_pair_fraction = 0.0;
};

enum class SymmetrizeRule { Max, Mean };

/// Row-wise softmax of raw / sqrt(scale_dim), stabilized by subtracting each row's maximum.
DenseGraph row_normalize_scaled(const Matrix& raw, int scale_dim, NodeKind kind = NodeKind::Token);

/// Edge {i, j} iff sym(g_ij, g_ji) > tau and i != j.
BinaryGraph threshold_binarize(const DenseGraph& g, double tau, SymmetrizeRule rule = SymmetrizeRule::Max);

/// Mean local clustering; nodes with degree < 2 contribute 0.
double clustering_coefficient(const BinaryGraph& g);

/// BFS over every source. Mean is taken over connected ordered pairs only.
PathLength average_path_length(const BinaryGraph& g);

GraphMeasures measure_binary(const BinaryGraph& g);

/// 1/n: the uninformative weight level of an n-node row-stochastic graph.
inline double auto_threshold(std::size_t n) { return 1.0 / static_cast<double>(n); }

/// Binarize (max rule) and measure. A missing tau selects auto_threshold(n).
GraphMeasures graph_measures(const DenseGraph& g, std::optional<double> tau = std::nullopt,
                             SymmetrizeRule rule = SymmetrizeRule::Max);

DenseGraph diagonal_concat(std::span<const DenseGraph> graphs);

} // namespace relgraph
