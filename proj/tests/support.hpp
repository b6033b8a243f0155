#pragma once

#include "relgraph/graph_core.hpp"
#include "relgraph/model_io.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using AdjacencyList = std::vector<std::vector<bool>>;

// --- synthetic archives -------------------------------------------------------

/// 12-layer ViT-Tiny shape: 14x14 grid + class token, 192 dims, 3 heads, 768 hidden.
relgraph::ModelArchive vit_tiny_archive(std::uint64_t seed, int depth = 12);

/// Pooling model with no token-mixer tensors, only fc1/fc2 per layer.
relgraph::ModelArchive metaformer_archive(int depth = 12, int kernel = 3, int side = 14, int hidden = 32);

relgraph::ModelArchive mixer_archive(std::uint64_t seed, int side = 4, int dim = 8, int depth = 2);

/// Two layers on a 14x14 grid with window 7; the second layer is shifted by 3.
relgraph::ModelArchive swin_archive(std::uint64_t seed);

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double stddev);
relgraph::Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double stddev = 1.0);

// --- oracles ------------------------------------------------------------------
// Deliberately naive: nested loops over explicit adjacency, long double where it matters.

AdjacencyList random_adjacency(std::mt19937_64& rng, int n, double p);
relgraph::BinaryGraph to_binary(const AdjacencyList& adj);

/// Mean local clustering by enumerating every neighbor pair.
double oracle_clustering(const AdjacencyList& adj);

struct OraclePath {
    double mean;
    double fraction;
};
/// Floyd-Warshall on hop counts.
OraclePath oracle_path_length(const AdjacencyList& adj);

/// max-rule, strict threshold, on a dense matrix.
AdjacencyList oracle_threshold(const relgraph::Matrix& w, double tau);

std::vector<long double> oracle_softmax(const std::vector<long double>& logits);
relgraph::Matrix oracle_softmax_rows(const relgraph::Matrix& m);

/// Naive triple loop.
relgraph::Matrix oracle_matmul(const relgraph::Matrix& a, const relgraph::Matrix& b);

/// Pooling adjacency from the Chebyshev distance between grid cells.
relgraph::Matrix oracle_pooling(int h, int w, int kernel);

// --- paths ------------------------------------------------------------------------

std::filesystem::path data_dir();
std::filesystem::path fresh_temp_dir(const std::string& tag);
std::string read_text(const std::filesystem::path& path);

} // namespace testsupport
