#include "relgraph/builders.hpp"

#include "relgraph/error.hpp"

#include <cmath>
#include <string>

namespace relgraph {

namespace {

std::string dims(const Matrix& m) {
    return "[" + std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "]";
}

void require_nodes(const LayerLayout& layout, Eigen::Index n) {
    if (static_cast<std::size_t>(n) != layout.node_count()) {
        throw Error(ErrorKind::ShapeMismatch, std::to_string(n) + " tokens do not fit grid " +
                                                  std::to_string(layout.grid.h) + "x" + std::to_string(layout.grid.w) +
                                                  (layout.has_class_token ? " + class token" : ""));
    }
}

LayerAggregation wrap(DenseGraph graph, const LayerLayout& layout) {
    return {std::move(graph), layout.layer_index, layout.grid, layout.has_class_token};
}

} // namespace

// ---------------------------------------------------------------------------

LayerAggregation vit_aggregation(const Matrix& pos_embed, const Matrix& wq, const Matrix& wk, int scale_dim,
                                 const LayerLayout& layout) {
    const auto d = pos_embed.cols();
    if (wq.rows() != d || wk.rows() != d || wq.cols() != wk.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "pos_embed " + dims(pos_embed) + ", q " + dims(wq) + ", k " + dims(wk));
    }
    require_nodes(layout, pos_embed.rows());
    const Matrix queries = pos_embed * wq;
    const Matrix keys = pos_embed * wk;
    const Matrix raw = queries * keys.transpose();
    return wrap(row_normalize_scaled(raw, scale_dim, NodeKind::Token), layout);
}

LayerAggregation vit_aggregation_per_head(const Matrix& pos_embed, const Matrix& wq, const Matrix& wk, int heads,
                                          const LayerLayout& layout) {
    const auto d = pos_embed.cols();
    if (wq.rows() != d || wk.rows() != d || wq.cols() != wk.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "pos_embed " + dims(pos_embed) + ", q " + dims(wq) + ", k " + dims(wk));
    }
    if (heads < 1 || wq.cols() % heads != 0) {
        throw Error(ErrorKind::ShapeMismatch, "projection width not divisible by " + std::to_string(heads) + " heads");
    }
    require_nodes(layout, pos_embed.rows());
    const auto head_dim = wq.cols() / heads;
    const Matrix queries = pos_embed * wq;
    const Matrix keys = pos_embed * wk;
    Matrix logits = Matrix::Zero(pos_embed.rows(), pos_embed.rows());
    const double head_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int h = 0; h < heads; ++h) {
        logits += head_scale * (queries.middleCols(h * head_dim, head_dim) *
                                keys.middleCols(h * head_dim, head_dim).transpose());
    }
    logits /= static_cast<double>(heads);
    return wrap(row_normalize_scaled(logits, 1, NodeKind::Token), layout);
}

// ---------------------------------------------------------------------------

std::vector<WindowSlot> swin_window_assignment(GridShape grid, int window, int shift) {
    if (window < 1 || grid.h % window != 0 || grid.w % window != 0) {
        throw Error(ErrorKind::BadWindowAssignment, "grid not divisible by window " + std::to_string(window));
    }
    const int windows_per_row = grid.w / window;
    std::vector<WindowSlot> slots(static_cast<std::size_t>(grid.size()));
    for (int r = 0; r < grid.h; ++r) {
        for (int c = 0; c < grid.w; ++c) {
            // Position of token (r, c) after rolling the grid by -shift.
            const int sr = ((r - shift) % grid.h + grid.h) % grid.h;
            const int sc = ((c - shift) % grid.w + grid.w) % grid.w;
            auto& slot = slots[static_cast<std::size_t>(r * grid.w + c)];
            slot.window = (sr / window) * windows_per_row + sc / window;
            slot.local = (sr % window) * window + sc % window;
        }
    }
    return slots;
}

Matrix expand_relative_position_bias(const Matrix& table, int window) {
    const int span = 2 * window - 1;
    if (window < 1 || table.rows() != span * span || table.cols() < 1) {
        throw Error(ErrorKind::ShapeMismatch, "relative position table " + dims(table) + " for window " +
                                                  std::to_string(window));
    }
    const Eigen::VectorXd averaged = table.rowwise().mean();
    const int n = window * window;
    Matrix bias(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            const int dy = a / window - b / window + window - 1;
            const int dx = a % window - b % window + window - 1;
            bias(a, b) = averaged(dy * span + dx);
        }
    }
    return bias;
}

LayerAggregation swin_aggregation(std::span<const Matrix> bias, std::span<const Matrix> mask,
                                  std::span<const WindowSlot> assignment, int scale_dim, const LayerLayout& layout) {
    if (mask.empty()) throw Error(ErrorKind::ShapeMismatch, "no window masks");
    const auto windows = static_cast<int>(mask.size());
    const auto window_nodes = mask.front().rows();
    if (bias.size() != 1 && bias.size() != mask.size()) {
        throw Error(ErrorKind::ShapeMismatch, "bias count must be 1 or one per window");
    }
    for (const auto& m : mask) {
        if (m.rows() != window_nodes || m.cols() != window_nodes) throw Error(ErrorKind::ShapeMismatch, "mask " + dims(m));
    }
    for (const auto& b : bias) {
        if (b.rows() != window_nodes || b.cols() != window_nodes) throw Error(ErrorKind::ShapeMismatch, "bias " + dims(b));
    }
    require_nodes(layout, static_cast<Eigen::Index>(assignment.size()));

    // members[w][local] = token
    std::vector<std::vector<int>> members(windows, std::vector<int>(window_nodes, -1));
    for (std::size_t t = 0; t < assignment.size(); ++t) {
        const auto& slot = assignment[t];
        if (slot.window < 0 || slot.window >= windows || slot.local < 0 || slot.local >= window_nodes) {
            throw Error(ErrorKind::BadWindowAssignment, "token " + std::to_string(t) + " has no valid window slot");
        }
        auto& owner = members[slot.window][slot.local];
        if (owner != -1) {
            throw Error(ErrorKind::BadWindowAssignment, "tokens " + std::to_string(owner) + " and " + std::to_string(t) +
                                                            " share a window slot");
        }
        owner = static_cast<int>(t);
    }
    for (const auto& w : members) {
        for (int owner : w) {
            if (owner == -1) throw Error(ErrorKind::BadWindowAssignment, "window slot left empty");
        }
    }

    const double identity_logit = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    DenseGraph graph;
    graph.node_kind = NodeKind::Token;
    graph.row_normalized = true;
    graph.weights = Matrix::Zero(static_cast<Eigen::Index>(assignment.size()), static_cast<Eigen::Index>(assignment.size()));
    for (int w = 0; w < windows; ++w) {
        Matrix logits = bias.size() == 1 ? bias.front() : bias[w];
        logits += mask[w];
        logits.diagonal().array() += identity_logit;
        const auto block = row_normalize_scaled(logits, 1, NodeKind::Token);
        for (Eigen::Index a = 0; a < window_nodes; ++a) {
            for (Eigen::Index b = 0; b < window_nodes; ++b) {
                graph.weights(members[w][a], members[w][b]) = block.weights(a, b);
            }
        }
    }
    return wrap(std::move(graph), layout);
}

LayerAggregation mixer_aggregation(const Matrix& token_weight, int scale_dim, const LayerLayout& layout) {
    if (token_weight.rows() != token_weight.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "token weight " + dims(token_weight) + " is not square");
    }
    require_nodes(layout, token_weight.rows());
    const Matrix transposed = token_weight.transpose();
    return wrap(row_normalize_scaled(transposed, scale_dim, NodeKind::Token), layout);
}

LayerAggregation metaformer_aggregation(GridShape grid, int kernel, int layer_index) {
    if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorKind::BadKernel, "kernel must be odd and >= 1");
    if (grid.h < 1 || grid.w < 1) throw Error(ErrorKind::InvalidArgument, "empty grid");
    const int radius = kernel / 2;
    const double weight = 1.0 / static_cast<double>(kernel * kernel);
    const int n = grid.size();

    DenseGraph graph;
    graph.node_kind = NodeKind::Token;
    graph.row_normalized = false;
    graph.weights = Matrix::Zero(n, n);
    for (int r = 0; r < grid.h; ++r) {
        for (int c = 0; c < grid.w; ++c) {
            for (int nr = std::max(0, r - radius); nr <= std::min(grid.h - 1, r + radius); ++nr) {
                for (int nc = std::max(0, c - radius); nc <= std::min(grid.w - 1, c + radius); ++nc) {
                    graph.weights(r * grid.w + c, nr * grid.w + nc) = weight;
                }
            }
        }
    }
    return {std::move(graph), layer_index, grid, false};
}

DenseGraph affine_graph(const Matrix& fc1, const Matrix& fc2, int scale_dim) {
    if (fc1.cols() != fc2.rows() || fc1.rows() != fc2.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "fc1 " + dims(fc1) + " and fc2 " + dims(fc2));
    }
    const Matrix product = fc1 * fc2;
    return row_normalize_scaled(product, scale_dim, NodeKind::Channel);
}

// ---------------------------------------------------------------------------
// Resampling. The class token, when present, stays node 0: its self weight
// is kept, its row keeps its mass and its column keeps its per-node level.

LayerAggregation downsample(const LayerAggregation& g, int factor) {
    if (factor < 1) throw Error(ErrorKind::InvalidArgument, "factor must be >= 1");
    const GridShape src = g.source_grid;
    if (src.h % factor != 0 || src.w % factor != 0) {
        throw Error(ErrorKind::IndivisibleGrid, std::to_string(src.h) + "x" + std::to_string(src.w) +
                                                    " grid by factor " + std::to_string(factor));
    }
    const GridShape dst{src.h / factor, src.w / factor};
    const int off = g.has_class_token ? 1 : 0;
    const auto n_src = static_cast<Eigen::Index>(src.size() + off);
    const auto n_dst = static_cast<Eigen::Index>(dst.size() + off);
    const auto& a = g.graph.weights;
    if (a.rows() != n_src) throw Error(ErrorKind::ShapeMismatch, "graph size does not match its grid");

    // Spatial source node -> target node.
    std::vector<Eigen::Index> target(n_src);
    if (off) target[0] = 0;
    for (int r = 0; r < src.h; ++r) {
        for (int c = 0; c < src.w; ++c) {
            target[off + r * src.w + c] = off + (r / factor) * dst.w + c / factor;
        }
    }

    Matrix column_sums = Matrix::Zero(n_src, n_dst);
    for (Eigen::Index i = 0; i < n_src; ++i) {
        for (Eigen::Index j = 0; j < n_src; ++j) column_sums(i, target[j]) += a(i, j);
    }
    Matrix out = Matrix::Zero(n_dst, n_dst);
    for (Eigen::Index i = 0; i < n_src; ++i) out.row(target[i]) += column_sums.row(i);

    const double scale = 1.0 / static_cast<double>(factor);
    const double block = static_cast<double>(factor * factor);
    for (Eigen::Index x = off; x < n_dst; ++x) {
        for (Eigen::Index y = off; y < n_dst; ++y) out(x, y) *= scale;
    }
    if (off) {
        out(0, 0) = a(0, 0);
        for (Eigen::Index x = 1; x < n_dst; ++x) out(x, 0) /= block;
    }

    DenseGraph graph{std::move(out), g.graph.node_kind, false};
    return {std::move(graph), g.layer_index, dst, g.has_class_token};
}

LayerAggregation upsample(const LayerAggregation& g, int factor) {
    if (factor < 1) throw Error(ErrorKind::InvalidArgument, "factor must be >= 1");
    const GridShape src = g.source_grid;
    const GridShape dst{src.h * factor, src.w * factor};
    const int off = g.has_class_token ? 1 : 0;
    const auto n_src = static_cast<Eigen::Index>(src.size() + off);
    const auto n_dst = static_cast<Eigen::Index>(dst.size() + off);
    const auto& a = g.graph.weights;
    if (a.rows() != n_src) throw Error(ErrorKind::ShapeMismatch, "graph size does not match its grid");

    std::vector<Eigen::Index> parent(n_dst);
    if (off) parent[0] = 0;
    for (int r = 0; r < dst.h; ++r) {
        for (int c = 0; c < dst.w; ++c) {
            parent[off + r * dst.w + c] = off + (r / factor) * src.w + c / factor;
        }
    }

    const double scale = 1.0 / static_cast<double>(factor);
    const double block = static_cast<double>(factor * factor);
    Matrix out(n_dst, n_dst);
    for (Eigen::Index x = 0; x < n_dst; ++x) {
        for (Eigen::Index y = 0; y < n_dst; ++y) {
            const double v = a(parent[x], parent[y]);
            const bool cls_x = off && x == 0;
            const bool cls_y = off && y == 0;
            if (cls_x && cls_y) {
                out(x, y) = v;
            } else if (cls_x) {
                out(x, y) = v / block;
            } else if (cls_y) {
                out(x, y) = v;
            } else {
                out(x, y) = v * scale;
            }
        }
    }

    DenseGraph graph{std::move(out), g.graph.node_kind, false};
    return {std::move(graph), g.layer_index, dst, g.has_class_token};
}

LayerAggregation apply_class_token_policy(const LayerAggregation& g, ClassTokenPolicy policy) {
    if (policy == ClassTokenPolicy::Keep) return g;
    LayerAggregation out = g;
    const auto n = g.graph.weights.rows();
    if (policy == ClassTokenPolicy::Drop) {
        if (!g.has_class_token) return g;
        out.graph.weights = g.graph.weights.bottomRightCorner(n - 1, n - 1);
        out.graph.row_normalized = false;
        out.has_class_token = false;
        return out;
    }
    // Pad
    if (g.has_class_token) return g;
    out.graph.weights = Matrix::Zero(n + 1, n + 1);
    out.graph.weights.bottomRightCorner(n, n) = g.graph.weights;
    out.graph.weights.row(0).setConstant(1.0 / static_cast<double>(n + 1));
    out.has_class_token = true;
    return out;
}

CanonicalAggregation canonicalize(const LayerAggregation& g, ClassTokenPolicy policy) {
    const GridShape grid = g.source_grid;
    const auto incompatible = [&] {
        return Error(ErrorKind::IncompatibleGrid, std::to_string(grid.h) + "x" + std::to_string(grid.w) +
                                                      " cannot be resampled to 14x14 with one integer factor");
    };

    LayerAggregation spatial = policy == ClassTokenPolicy::Drop ? apply_class_token_policy(g, policy) : g;
    if (grid.h == kCanonicalSide && grid.w == kCanonicalSide) {
        // already canonical
    } else if (grid.h > kCanonicalSide) {
        const int factor = grid.h / kCanonicalSide;
        if (grid.h % kCanonicalSide != 0 || grid.w != kCanonicalSide * factor) throw incompatible();
        spatial = downsample(spatial, factor);
    } else {
        if (kCanonicalSide % grid.h != 0) throw incompatible();
        const int factor = kCanonicalSide / grid.h;
        if (grid.w * factor != kCanonicalSide) throw incompatible();
        spatial = upsample(spatial, factor);
    }
    if (policy == ClassTokenPolicy::Pad) spatial = apply_class_token_policy(spatial, policy);

    return {std::move(spatial.graph), policy, spatial.has_class_token};
}

DenseGraph compose_layers(std::span<const CanonicalAggregation> layers, ComposeOrder order) {
    if (layers.empty()) throw Error(ErrorKind::EmptyList, "no layers to compose");
    const auto n = layers.front().graph.weights.rows();
    for (const auto& layer : layers) {
        if (layer.graph.weights.rows() != n || layer.has_class_token != layers.front().has_class_token) {
            throw Error(ErrorKind::MixedSizes, "layers differ in size or class-token policy");
        }
    }
    Matrix product = layers.front().graph.weights;
    for (std::size_t l = 1; l < layers.size(); ++l) {
        if (order == ComposeOrder::Forward) {
            product = layers[l].graph.weights * product;
        } else {
            product = product * layers[l].graph.weights;
        }
    }
    return row_normalize_scaled(product, 1, NodeKind::Token);
}

// ---------------------------------------------------------------------------
// Model-level construction

Matrix to_matrix(const TensorRecord& tensor) {
    const auto rows = static_cast<Eigen::Index>(tensor.rows());
    const auto cols = static_cast<Eigen::Index>(tensor.cols());
    return Eigen::Map<const Matrix>(tensor.data.data(), rows, cols);
}

int aggregation_scale_dim(const ModelMeta& meta, int layer, HeadMode mode) {
    const int d = meta.embed_dim_of_layer(layer);
    if (mode == HeadMode::PerHead && meta.family != Family::Mixer) return d / meta.heads_of_layer(layer);
    return meta.head_dim_for_scaling > 0 ? meta.head_dim_for_scaling : d;
}

int affine_scale_dim(const ModelMeta& meta, int layer) {
    return meta.embed_dim_of_layer(layer);
}

LayerAggregation build_layer_aggregation(const ValidatedModel& model, int layer, HeadMode mode) {
    const auto& meta = model.meta();
    const LayerLayout layout{layer, meta.grid_of_layer(layer), meta.has_class_token};
    switch (meta.family) {
    case Family::ViT:
    case Family::DeiT: {
        const Matrix pos = to_matrix(model.global_tensor("pos_embed"));
        const Matrix wq = to_matrix(model.layer_tensor(layer, "q_weight"));
        const Matrix wk = to_matrix(model.layer_tensor(layer, "k_weight"));
        if (mode == HeadMode::PerHead) {
            return vit_aggregation_per_head(pos, wq, wk, meta.heads_of_layer(layer), layout);
        }
        return vit_aggregation(pos, wq, wk, aggregation_scale_dim(meta, layer, mode), layout);
    }
    case Family::Swin: {
        const int window = meta.window_of_layer(layer);
        const Matrix bias = expand_relative_position_bias(to_matrix(model.layer_tensor(layer, "rel_bias_table")), window);
        const auto& mask_tensor = model.layer_tensor(layer, "attn_mask");
        const auto windows = static_cast<std::size_t>(mask_tensor.shape[0]);
        const auto wn = static_cast<Eigen::Index>(window * window);
        std::vector<Matrix> masks;
        masks.reserve(windows);
        for (std::size_t w = 0; w < windows; ++w) {
            masks.push_back(Eigen::Map<const Matrix>(mask_tensor.data.data() + w * wn * wn, wn, wn));
        }
        const auto slots = swin_window_assignment(layout.grid, window, meta.shift_of_layer(layer));
        return swin_aggregation(std::span(&bias, 1), masks, slots, aggregation_scale_dim(meta, layer, mode), layout);
    }
    case Family::Mixer:
        return mixer_aggregation(to_matrix(model.layer_tensor(layer, "token_weight")),
                                 aggregation_scale_dim(meta, layer, mode), layout);
    case Family::MetaFormer:
        return metaformer_aggregation(layout.grid, meta.pool_kernel, layer);
    }
    throw Error(ErrorKind::UnknownFamily, "unsupported family");
}

DenseGraph build_layer_affine(const ValidatedModel& model, int layer) {
    return affine_graph(to_matrix(model.layer_tensor(layer, "fc1")), to_matrix(model.layer_tensor(layer, "fc2")),
                        affine_scale_dim(model.meta(), layer));
}

DenseGraph composed_aggregation(const ValidatedModel& model, const BuildOptions& options) {
    std::vector<CanonicalAggregation> layers;
    layers.reserve(static_cast<std::size_t>(model.meta().depth));
    for (int l = 0; l < model.meta().depth; ++l) {
        layers.push_back(canonicalize(build_layer_aggregation(model, l, options.head_mode), options.class_token));
    }
    return compose_layers(layers, options.order);
}

GraphMeasures mean_measures(std::span<const GraphMeasures> measures) {
    if (measures.empty()) throw Error(ErrorKind::EmptyList, "no measures to average");
    GraphMeasures mean{0.0, 0.0, 0.0};
    for (const auto& m : measures) {
        mean.clustering += m.clustering;
        mean.path_length += m.path_length;
        mean.connected_pair_fraction += m.connected_pair_fraction;
    }
    const auto count = static_cast<double>(measures.size());
    mean.clustering /= count;
    mean.path_length /= count;
    mean.connected_pair_fraction /= count;
    return mean;
}

ModelMeasures per_layer_measures(const ValidatedModel& model, const BuildOptions& options) {
    ModelMeasures out;
    std::vector<GraphMeasures> aggregation, affine;
    for (int l = 0; l < model.meta().depth; ++l) {
        const auto layer = apply_class_token_policy(build_layer_aggregation(model, l, options.head_mode),
                                                    options.class_token);
        const auto channels = build_layer_affine(model, l);

        LayerMeasures row;
        row.layer = l;
        row.n_tokens = layer.graph.n();
        row.tau_aggregation = options.tau_aggregation.value_or(auto_threshold(row.n_tokens));
        row.aggregation = graph_measures(layer.graph, row.tau_aggregation);
        row.n_channels = channels.n();
        row.tau_affine = options.tau_affine.value_or(auto_threshold(row.n_channels));
        row.affine = graph_measures(channels, row.tau_affine);
        aggregation.push_back(row.aggregation);
        affine.push_back(row.affine);
        out.layers.push_back(row);
    }
    out.aggregation_mean = mean_measures(aggregation);
    out.affine_mean = mean_measures(affine);
    return out;
}

ModelLevelAggregation model_aggregation_measures(const ValidatedModel& model, const BuildOptions& options,
                                                 const ModelMeasures* per_layer) {
    ModelLevelAggregation out;
    if (options.mode == ModelMode::Compose) {
        const auto final_graph = composed_aggregation(model, options);
        out.n_tokens = final_graph.n();
        out.tau = options.tau_aggregation.value_or(auto_threshold(out.n_tokens));
        out.measures = graph_measures(final_graph, out.tau);
        return out;
    }
    ModelMeasures computed;
    if (!per_layer) {
        computed = per_layer_measures(model, options);
        per_layer = &computed;
    }
    out.n_tokens = per_layer->layers.front().n_tokens;
    out.tau = per_layer->layers.front().tau_aggregation;
    out.measures = per_layer->aggregation_mean;
    return out;
}

} // namespace relgraph
