#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relgraph {

inline constexpr std::string_view kArchiveMagic = "RELGRAPH";
inline constexpr int kArchiveFormatVersion = 1;

enum class DType { Float32, Float64 };

std::string_view to_string(DType dtype);
std::size_t dtype_size(DType dtype);

struct TensorRecord {
    std::string name;
    DType dtype = DType::Float32;
    std::vector<std::uint64_t> shape;
    // Row-major. Float32 tensors are held widened to double; narrowing on
    // write is exact for any value that was read from a float32 payload.
    std::vector<double> data;

    std::uint64_t element_count() const;
    std::size_t rows() const { return shape.empty() ? 1 : static_cast<std::size_t>(shape[0]); }
    std::size_t cols() const;

    bool operator==(const TensorRecord&) const = default;
};

enum class Family { ViT, DeiT, Swin, Mixer, MetaFormer };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

struct GridShape {
    int h = 0;
    int w = 0;

    int size() const { return h * w; }
    bool operator==(const GridShape&) const = default;
};

/// Architecture description carried alongside the weights.
///
/// Per-stage vectors (embed_dims, token_grids, heads) are indexed by stage;
/// stage_depths assigns consecutive layers to stages and may be left empty
/// for single-stage models. shift_sizes is per layer.
struct ModelMeta {
    Family family = Family::ViT;
    int depth = 0;
    std::vector<int> embed_dims;
    std::vector<GridShape> token_grids;
    std::vector<int> stage_depths;
    bool has_class_token = false;
    std::vector<int> heads;
    int window_size = 0;
    std::vector<int> shift_sizes;
    int pool_kernel = 0;
    // 0 selects the family default (see builders).
    int head_dim_for_scaling = 0;
    std::optional<int> epoch;

    int stage_count() const;
    int stage_of_layer(int layer) const;
    GridShape grid_of_layer(int layer) const;
    int embed_dim_of_layer(int layer) const;
    int heads_of_layer(int layer) const;
    /// Swin window extent; clamped to the grid when the grid is smaller.
    int window_of_layer(int layer) const;
    /// Swin cyclic shift; 0 when the window covers the whole grid.
    int shift_of_layer(int layer) const;
    int tokens_of_layer(int layer) const;

    bool operator==(const ModelMeta&) const = default;
};

struct ModelArchive {
    ModelMeta meta;
    std::vector<TensorRecord> tensors;

    const TensorRecord* find(std::string_view name) const;

    bool operator==(const ModelArchive&) const = default;
};

void write_archive(const ModelArchive& archive, const std::filesystem::path& path);
std::vector<std::byte> serialize_archive(const ModelArchive& archive);

ModelArchive read_archive(const std::filesystem::path& path);
ModelArchive parse_archive(const std::vector<std::byte>& bytes);

/// Archive that passed validate_archive. Builders only accept this type.
class ValidatedModel {
public:
    const ModelMeta& meta() const { return archive_.meta; }
    const ModelArchive& archive() const { return archive_; }

    /// Per-layer tensor `layer<i>.<name>`; single-layer models may omit the prefix.
    const TensorRecord& layer_tensor(int layer, std::string_view name) const;
    const TensorRecord& global_tensor(std::string_view name) const;

private:
    friend ValidatedModel validate_archive(ModelArchive archive);
    explicit ValidatedModel(ModelArchive archive) : archive_(std::move(archive)) {}

    ModelArchive archive_;
};

std::string layer_tensor_name(int layer, std::string_view name);
ValidatedModel validate_archive(ModelArchive archive);

// ---------------------------------------------------------------------------
// Connectomes

struct ConnectomeEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 1.0;

    bool operator==(const ConnectomeEdge&) const = default;
};

struct ConnectomeGraph {
    std::string name;
    std::size_t n = 0;
    std::vector<ConnectomeEdge> edges;
    std::vector<std::string> labels;
    std::size_t self_loops_dropped = 0;
};

ConnectomeGraph parse_connectome(std::string_view text, std::string name);
ConnectomeGraph read_connectome(const std::filesystem::path& path);
std::string format_connectome(const ConnectomeGraph& graph);

} // namespace relgraph
