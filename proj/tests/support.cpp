#include "support.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

using relgraph::DType;
using relgraph::Family;
using relgraph::Matrix;
using relgraph::ModelArchive;
using relgraph::TensorRecord;

namespace testsupport {

namespace {

TensorRecord float32_tensor(std::string name, std::vector<std::uint64_t> shape, std::vector<double> values) {
    for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
    return TensorRecord{std::move(name), DType::Float32, std::move(shape), std::move(values)};
}

std::string layered(int layer, const char* name) { return "layer" + std::to_string(layer) + "." + name; }

void add_channel_mlp(ModelArchive& a, std::mt19937_64& rng, int layer, int d, int hidden) {
    const auto ud = static_cast<std::uint64_t>(d), uh = static_cast<std::uint64_t>(hidden);
    a.tensors.push_back(float32_tensor(layered(layer, "fc1"), {ud, uh}, gaussian(rng, ud * uh, 0.5)));
    a.tensors.push_back(float32_tensor(layered(layer, "fc2"), {uh, ud}, gaussian(rng, ud * uh, 0.5)));
}

} // namespace

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double stddev) {
    Matrix m(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

ModelArchive vit_tiny_archive(std::uint64_t seed, int depth) {
    constexpr int d = 192, hidden = 768, tokens = 197;
    std::mt19937_64 rng(seed);
    ModelArchive a;
    a.meta.family = Family::ViT;
    a.meta.depth = depth;
    a.meta.embed_dims = {d};
    a.meta.token_grids = {{14, 14}};
    a.meta.has_class_token = true;
    a.meta.heads = {3};
    a.tensors.push_back(float32_tensor("pos_embed", {tokens, d}, gaussian(rng, tokens * d, 0.3)));
    for (int l = 0; l < depth; ++l) {
        a.tensors.push_back(float32_tensor(layered(l, "q_weight"), {d, d}, gaussian(rng, d * d, 0.15)));
        a.tensors.push_back(float32_tensor(layered(l, "k_weight"), {d, d}, gaussian(rng, d * d, 0.15)));
        add_channel_mlp(a, rng, l, d, hidden);
    }
    return a;
}

ModelArchive metaformer_archive(int depth, int kernel, int side, int hidden) {
    constexpr int d = 16;
    std::mt19937_64 rng(99);
    ModelArchive a;
    a.meta.family = Family::MetaFormer;
    a.meta.depth = depth;
    a.meta.embed_dims = {d};
    a.meta.token_grids = {{side, side}};
    a.meta.pool_kernel = kernel;
    for (int l = 0; l < depth; ++l) add_channel_mlp(a, rng, l, d, hidden);
    return a;
}

ModelArchive mixer_archive(std::uint64_t seed, int side, int dim, int depth) {
    std::mt19937_64 rng(seed);
    const auto n = static_cast<std::uint64_t>(side * side);
    ModelArchive a;
    a.meta.family = Family::Mixer;
    a.meta.depth = depth;
    a.meta.embed_dims = {dim};
    a.meta.token_grids = {{side, side}};
    for (int l = 0; l < depth; ++l) {
        a.tensors.push_back(float32_tensor(layered(l, "token_weight"), {n, n}, gaussian(rng, n * n, 1.0)));
        add_channel_mlp(a, rng, l, dim, 2 * dim);
    }
    return a;
}

ModelArchive swin_archive(std::uint64_t seed) {
    constexpr int side = 14, ws = 7, heads = 2, d = 8;
    std::mt19937_64 rng(seed);
    ModelArchive a;
    a.meta.family = Family::Swin;
    a.meta.depth = 2;
    a.meta.embed_dims = {d};
    a.meta.token_grids = {{side, side}};
    a.meta.heads = {heads};
    a.meta.window_size = ws;
    a.meta.shift_sizes = {0, 3};

    constexpr int n_windows = (side / ws) * (side / ws);
    constexpr std::uint64_t nw = ws * ws;
    const auto table_rows = static_cast<std::uint64_t>((2 * ws - 1) * (2 * ws - 1));
    for (int l = 0; l < 2; ++l) {
        const int shift = a.meta.shift_sizes[l];
        a.tensors.push_back(
            float32_tensor(layered(l, "rel_bias_table"), {table_rows, heads}, gaussian(rng, table_rows * heads, 1.0)));
        // Region labels on the shifted grid, as in the reference implementation.
        const auto region = [&](int v) { return shift == 0 ? 0 : (v < side - ws ? 0 : (v < side - shift ? 1 : 2)); };
        std::vector<double> mask(n_windows * nw * nw, 0.0);
        for (int wr = 0; wr < side / ws; ++wr)
            for (int wc = 0; wc < side / ws; ++wc) {
                const int w = wr * (side / ws) + wc;
                for (std::uint64_t i = 0; i < nw; ++i)
                    for (std::uint64_t j = 0; j < nw; ++j) {
                        const int ri = 3 * region(wr * ws + int(i) / ws) + region(wc * ws + int(i) % ws);
                        const int rj = 3 * region(wr * ws + int(j) / ws) + region(wc * ws + int(j) % ws);
                        mask[(w * nw + i) * nw + j] = ri == rj ? 0.0 : -100.0;
                    }
            }
        a.tensors.push_back(float32_tensor(layered(l, "attn_mask"), {n_windows, nw, nw}, std::move(mask)));
        add_channel_mlp(a, rng, l, d, 2 * d);
    }
    return a;
}

// ---------------------------------------------------------------------------

AdjacencyList random_adjacency(std::mt19937_64& rng, int n, double p) {
    std::bernoulli_distribution coin(p);
    AdjacencyList adj(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) adj[i][j] = adj[j][i] = coin(rng);
    return adj;
}

relgraph::BinaryGraph to_binary(const AdjacencyList& adj) {
    relgraph::BinaryGraph g(adj.size());
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (std::size_t j = 0; j < adj.size(); ++j)
            if (adj[i][j]) g.add_edge(i, j);
    return g;
}

double oracle_clustering(const AdjacencyList& adj) {
    const std::size_t n = adj.size();
    long double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && adj[i][j]) nb.push_back(j);
        if (nb.size() < 2) continue;
        long double closed = 0, pairs = 0;
        for (std::size_t a = 0; a < nb.size(); ++a)
            for (std::size_t b = a + 1; b < nb.size(); ++b) {
                pairs += 1;
                if (adj[nb[a]][nb[b]]) closed += 1;
            }
        total += closed / pairs;
    }
    return static_cast<double>(total / n);
}

OraclePath oracle_path_length(const AdjacencyList& adj) {
    const std::size_t n = adj.size();
    const long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<std::vector<long long>> d(n, std::vector<long long>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && adj[i][j]) d[i][j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    long long sum = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && d[i][j] < inf) {
                sum += d[i][j];
                ++pairs;
            }
    if (pairs == 0) return {std::numeric_limits<double>::infinity(), 0.0};
    return {static_cast<double>(sum) / static_cast<double>(pairs),
            static_cast<double>(pairs) / static_cast<double>(n * (n - 1))};
}

AdjacencyList oracle_threshold(const Matrix& w, double tau) {
    const auto n = static_cast<std::size_t>(w.rows());
    AdjacencyList adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (w(i, j) > tau || w(j, i) > tau)) adj[i][j] = true;
    return adj;
}

std::vector<long double> oracle_softmax(const std::vector<long double>& logits) {
    long double hi = logits.front();
    for (auto v : logits) hi = std::max(hi, v);
    std::vector<long double> out;
    long double sum = 0;
    for (auto v : logits) {
        out.push_back(std::exp(v - hi));
        sum += out.back();
    }
    for (auto& v : out) v /= sum;
    return out;
}

Matrix oracle_softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<long double> row;
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        const auto s = oracle_softmax(row);
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = static_cast<double>(s[j]);
    }
    return out;
}

Matrix oracle_matmul(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            long double acc = 0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
            out(i, j) = static_cast<double>(acc);
        }
    return out;
}

Matrix oracle_pooling(int h, int w, int kernel) {
    const int n = h * w, r = kernel / 2;
    Matrix m = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (std::abs(i / w - j / w) <= r && std::abs(i % w - j % w) <= r) m(i, j) = 1.0 / (kernel * kernel);
    return m;
}

std::filesystem::path data_dir() { return RELGRAPH_TEST_DATA_DIR; }

namespace {

// Removes every directory handed out by fresh_temp_dir when the process ends.
struct TempDirs {
    std::vector<std::filesystem::path> paths;
    ~TempDirs() {
        std::error_code ec;
        for (const auto& p : paths) std::filesystem::remove_all(p, ec);
    }
};

TempDirs& temp_dirs() {
    static TempDirs dirs;
    return dirs;
}

} // namespace

std::filesystem::path fresh_temp_dir(const std::string& tag) {
    auto& registry = temp_dirs();
    auto dir = std::filesystem::temp_directory_path() /
               ("relgraph_test_" + std::to_string(::getpid()) + "_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    registry.paths.push_back(dir);
    return dir;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace testsupport
