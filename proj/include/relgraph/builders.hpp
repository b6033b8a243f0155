#pragma once

#include "relgraph/graph_core.hpp"
#include "relgraph/model_io.hpp"

#include <optional>
#include <span>
#include <vector>

namespace relgraph {

/// Side of the canonical token grid every layer is resampled to.
inline constexpr int kCanonicalSide = 14;

/// Position of a layer graph inside its model.
struct LayerLayout {
    int layer_index = 0;
    GridShape grid{};
    bool has_class_token = false;

    std::size_t node_count() const {
        return static_cast<std::size_t>(grid.size()) + (has_class_token ? 1 : 0);
    }
};

/// Token graph of one layer. When present the class token is node 0,
/// followed by the spatial tokens in row-major grid order.
struct LayerAggregation {
    DenseGraph graph;
    int layer_index = 0;
    GridShape source_grid{};
    bool has_class_token = false;
};

enum class ClassTokenPolicy { Keep, Drop, Pad };

struct CanonicalAggregation {
    DenseGraph graph;
    ClassTokenPolicy policy = ClassTokenPolicy::Keep;
    bool has_class_token = false;
};

enum class HeadMode { Whole, PerHead };
enum class ComposeOrder { Forward, Reverse };
enum class ModelMode { Compose, LayerMean };

// --- per-family token mixers ----------------------------------------------

/// Softmax(P Wq Wk^T P^T / sqrt(scale_dim)). Shared by ViT and DeiT.
LayerAggregation vit_aggregation(const Matrix& pos_embed, const Matrix& wq, const Matrix& wk, int scale_dim,
                                 const LayerLayout& layout);

/// Per-head variant: logits of each head slice scaled by sqrt(head dim),
/// averaged over heads, then one softmax.
LayerAggregation vit_aggregation_per_head(const Matrix& pos_embed, const Matrix& wq, const Matrix& wk, int heads,
                                          const LayerLayout& layout);

struct WindowSlot {
    int window = -1;
    int local = -1;
};

/// Window membership of every token (row-major) after the cyclic shift
/// used by shifted-window attention. Windows are numbered row-major over
/// the shifted grid.
std::vector<WindowSlot> swin_window_assignment(GridShape grid, int window, int shift);

/// Expands a ((2w-1)^2, heads) relative-position table into the (w^2, w^2)
/// bias matrix, averaging the heads.
Matrix expand_relative_position_bias(const Matrix& table, int window);

/// Per window: Softmax(I / sqrt(scale_dim) + B + Mask). `bias` holds either
/// one matrix broadcast to every window or one per window; `mask` holds one
/// matrix per window. Entries across windows are 0.
LayerAggregation swin_aggregation(std::span<const Matrix> bias, std::span<const Matrix> mask,
                                  std::span<const WindowSlot> assignment, int scale_dim, const LayerLayout& layout);

/// Softmax(W^T / sqrt(scale_dim)); row i aggregates from source tokens j.
LayerAggregation mixer_aggregation(const Matrix& token_weight, int scale_dim, const LayerLayout& layout);

/// Average pooling: 1/K^2 towards every in-grid node of the K x K window.
LayerAggregation metaformer_aggregation(GridShape grid, int kernel, int layer_index = 0);

/// Softmax(W1 W2 / sqrt(scale_dim)) over channels.
DenseGraph affine_graph(const Matrix& fc1, const Matrix& fc2, int scale_dim);

// --- resampling and composition --------------------------------------------

/// out(x, y) = 1/K * sum_{i in block(x)} sum_{j in block(y)} A(i, j).
LayerAggregation downsample(const LayerAggregation& g, int factor);

/// out(x, y) = 1/K * A(x // K, y // K), with // taken per grid axis.
LayerAggregation upsample(const LayerAggregation& g, int factor);

/// Applies a class-token policy without changing the spatial grid.
LayerAggregation apply_class_token_policy(const LayerAggregation& g, ClassTokenPolicy policy);

/// Resamples to the 14 x 14 grid and applies the class-token policy.
CanonicalAggregation canonicalize(const LayerAggregation& g, ClassTokenPolicy policy);

/// Softmax(A_L ... A_1) for the forward order, Softmax(A_1 ... A_L) for reverse.
DenseGraph compose_layers(std::span<const CanonicalAggregation> layers, ComposeOrder order = ComposeOrder::Forward);

// --- model-level construction ---------------------------------------------

struct BuildOptions {
    HeadMode head_mode = HeadMode::Whole;
    ClassTokenPolicy class_token = ClassTokenPolicy::Keep;
    ComposeOrder order = ComposeOrder::Forward;
    ModelMode mode = ModelMode::Compose;
    std::optional<double> tau_aggregation;
    std::optional<double> tau_affine;
};

Matrix to_matrix(const TensorRecord& tensor);

int aggregation_scale_dim(const ModelMeta& meta, int layer, HeadMode mode);
int affine_scale_dim(const ModelMeta& meta, int layer);

LayerAggregation build_layer_aggregation(const ValidatedModel& model, int layer, HeadMode mode = HeadMode::Whole);
DenseGraph build_layer_affine(const ValidatedModel& model, int layer);

/// Final relational aggregation graph: every layer canonicalized, then composed.
DenseGraph composed_aggregation(const ValidatedModel& model, const BuildOptions& options);

struct LayerMeasures {
    int layer = 0;
    std::size_t n_tokens = 0;
    double tau_aggregation = 0.0;
    GraphMeasures aggregation;
    std::size_t n_channels = 0;
    double tau_affine = 0.0;
    GraphMeasures affine;
};

struct ModelMeasures {
    std::vector<LayerMeasures> layers;
    /// Across-layer means.
    GraphMeasures aggregation_mean;
    GraphMeasures affine_mean;
};

GraphMeasures mean_measures(std::span<const GraphMeasures> measures);

/// Per-layer measures at native resolution, class-token policy applied.
ModelMeasures per_layer_measures(const ValidatedModel& model, const BuildOptions& options = {});

struct ModelLevelAggregation {
    std::size_t n_tokens = 0;
    double tau = 0.0;
    GraphMeasures measures;
};

/// Model-level aggregation measures in the mode selected by options.mode.
ModelLevelAggregation model_aggregation_measures(const ValidatedModel& model, const BuildOptions& options,
                                                 const ModelMeasures* per_layer = nullptr);

} // namespace relgraph
