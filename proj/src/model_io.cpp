#include "relgraph/model_io.hpp"

#include "relgraph/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace relgraph {

namespace {

using nlohmann::json;

template <typename T>
void append_le(std::vector<std::byte>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<std::byte, sizeof(T)> raw;
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(raw.begin(), raw.end());
    }
    out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T load_le(const std::byte* src) {
    std::array<std::byte, sizeof(T)> raw;
    std::memcpy(raw.data(), src, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(raw.begin(), raw.end());
    }
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
}

DType parse_dtype(std::string_view name) {
    if (name == "float32") return DType::Float32;
    if (name == "float64") return DType::Float64;
    throw Error(ErrorKind::ManifestParseError, "unsupported dtype '" + std::string(name) + "'");
}

json meta_to_json(const ModelMeta& meta) {
    json grids = json::array();
    for (const auto& g : meta.token_grids) grids.push_back({g.h, g.w});
    json out = {
        {"family", std::string(to_string(meta.family))},
        {"depth", meta.depth},
        {"embed_dims", meta.embed_dims},
        {"token_grids", grids},
        {"stage_depths", meta.stage_depths},
        {"has_class_token", meta.has_class_token},
        {"heads", meta.heads},
        {"window_size", meta.window_size},
        {"shift_sizes", meta.shift_sizes},
        {"pool_kernel", meta.pool_kernel},
        {"head_dim_for_scaling", meta.head_dim_for_scaling},
    };
    if (meta.epoch) out["epoch"] = *meta.epoch;
    return out;
}

ModelMeta meta_from_json(const json& j) {
    ModelMeta meta;
    meta.family = parse_family(j.at("family").get<std::string>());
    meta.depth = j.at("depth").get<int>();
    meta.embed_dims = j.at("embed_dims").get<std::vector<int>>();
    for (const auto& g : j.at("token_grids")) {
        if (!g.is_array() || g.size() != 2) {
            throw Error(ErrorKind::ManifestParseError, "token grid must be [h, w]");
        }
        meta.token_grids.push_back({g[0].get<int>(), g[1].get<int>()});
    }
    meta.stage_depths = j.value("stage_depths", std::vector<int>{});
    meta.has_class_token = j.value("has_class_token", false);
    meta.heads = j.value("heads", std::vector<int>{});
    meta.window_size = j.value("window_size", 0);
    meta.shift_sizes = j.value("shift_sizes", std::vector<int>{});
    meta.pool_kernel = j.value("pool_kernel", 0);
    meta.head_dim_for_scaling = j.value("head_dim_for_scaling", 0);
    if (j.contains("epoch")) meta.epoch = j.at("epoch").get<int>();
    return meta;
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

} // namespace

std::string_view to_string(DType dtype) {
    return dtype == DType::Float32 ? "float32" : "float64";
}

std::size_t dtype_size(DType dtype) {
    return dtype == DType::Float32 ? 4 : 8;
}

std::uint64_t TensorRecord::element_count() const {
    std::uint64_t count = 1;
    for (auto extent : shape) count *= extent;
    return count;
}

std::size_t TensorRecord::cols() const {
    if (shape.size() < 2) return 1;
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) c *= static_cast<std::size_t>(shape[i]);
    return c;
}

std::string_view to_string(Family family) {
    switch (family) {
    case Family::ViT: return "vit";
    case Family::DeiT: return "deit";
    case Family::Swin: return "swin";
    case Family::Mixer: return "mixer";
    case Family::MetaFormer: return "metaformer";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    if (name == "vit") return Family::ViT;
    if (name == "deit") return Family::DeiT;
    if (name == "swin") return Family::Swin;
    if (name == "mixer") return Family::Mixer;
    if (name == "metaformer") return Family::MetaFormer;
    throw Error(ErrorKind::UnknownFamily, "'" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelMeta

int ModelMeta::stage_count() const {
    return stage_depths.empty() ? 1 : static_cast<int>(stage_depths.size());
}

int ModelMeta::stage_of_layer(int layer) const {
    if (layer < 0 || layer >= depth) {
        throw Error(ErrorKind::InvalidArgument, "layer " + std::to_string(layer) + " out of range");
    }
    if (stage_depths.empty()) return 0;
    int first = 0;
    for (int s = 0; s < static_cast<int>(stage_depths.size()); ++s) {
        first += stage_depths[s];
        if (layer < first) return s;
    }
    throw Error(ErrorKind::InvalidArgument, "stage_depths do not cover layer " + std::to_string(layer));
}

namespace {
template <typename T>
const T& per_stage(const std::vector<T>& values, int stage, const char* field) {
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, std::string(field) + " is empty");
    if (values.size() == 1) return values.front();
    if (stage >= static_cast<int>(values.size())) {
        throw Error(ErrorKind::InvalidArgument, std::string(field) + " has no entry for stage " + std::to_string(stage));
    }
    return values[stage];
}
} // namespace

GridShape ModelMeta::grid_of_layer(int layer) const {
    return per_stage(token_grids, stage_of_layer(layer), "token_grids");
}

int ModelMeta::embed_dim_of_layer(int layer) const {
    return per_stage(embed_dims, stage_of_layer(layer), "embed_dims");
}

int ModelMeta::heads_of_layer(int layer) const {
    if (heads.empty()) return 1;
    return per_stage(heads, stage_of_layer(layer), "heads");
}

int ModelMeta::window_of_layer(int layer) const {
    const auto grid = grid_of_layer(layer);
    return std::min({window_size, grid.h, grid.w});
}

int ModelMeta::shift_of_layer(int layer) const {
    const auto grid = grid_of_layer(layer);
    if (window_size >= std::min(grid.h, grid.w)) return 0;
    if (shift_sizes.empty()) return 0;
    if (layer >= static_cast<int>(shift_sizes.size())) {
        throw Error(ErrorKind::InvalidArgument, "shift_sizes has no entry for layer " + std::to_string(layer));
    }
    return shift_sizes[layer];
}

int ModelMeta::tokens_of_layer(int layer) const {
    return grid_of_layer(layer).size() + (has_class_token ? 1 : 0);
}

// ---------------------------------------------------------------------------
// Archive serialization

const TensorRecord* ModelArchive::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::vector<std::byte> serialize_archive(const ModelArchive& archive) {
    std::unordered_set<std::string> names;
    json entries = json::array();
    std::uint64_t offset = 0;
    for (const auto& t : archive.tensors) {
        if (!names.insert(t.name).second) {
            throw Error(ErrorKind::InvalidArgument, "duplicate tensor name '" + t.name + "'");
        }
        if (t.element_count() != t.data.size()) {
            throw Error(ErrorKind::ShapeMismatch, t.name + ": shape " + shape_string(t.shape) + " vs " +
                                                      std::to_string(t.data.size()) + " scalars");
        }
        const std::uint64_t length = t.data.size() * dtype_size(t.dtype);
        entries.push_back({{"name", t.name},
                           {"dtype", std::string(to_string(t.dtype))},
                           {"shape", t.shape},
                           {"byte_offset", offset},
                           {"byte_length", length}});
        offset += length;
    }
    const json manifest = {
        {"format_version", kArchiveFormatVersion},
        {"meta", meta_to_json(archive.meta)},
        {"tensors", entries},
    };
    const std::string text = manifest.dump();

    std::vector<std::byte> out;
    out.reserve(kArchiveMagic.size() + 8 + text.size() + offset);
    for (char c : kArchiveMagic) out.push_back(static_cast<std::byte>(c));
    append_le<std::uint64_t>(out, text.size());
    for (char c : text) out.push_back(static_cast<std::byte>(c));
    for (const auto& t : archive.tensors) {
        for (double v : t.data) {
            if (t.dtype == DType::Float32) {
                append_le<float>(out, static_cast<float>(v));
            } else {
                append_le<double>(out, v);
            }
        }
    }
    return out;
}

void write_archive(const ModelArchive& archive, const std::filesystem::path& path) {
    const auto bytes = serialize_archive(archive);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

ModelArchive parse_archive(const std::vector<std::byte>& bytes) {
    const std::size_t header = kArchiveMagic.size() + 8;
    if (bytes.size() < kArchiveMagic.size() ||
        std::memcmp(bytes.data(), kArchiveMagic.data(), kArchiveMagic.size()) != 0) {
        throw Error(ErrorKind::BadMagic, "missing RELGRAPH magic");
    }
    if (bytes.size() < header) throw Error(ErrorKind::TruncatedPayload, "header cut short");
    const auto manifest_len = load_le<std::uint64_t>(bytes.data() + kArchiveMagic.size());
    if (manifest_len > bytes.size() - header) {
        throw Error(ErrorKind::TruncatedPayload, "manifest length exceeds file size");
    }

    json manifest;
    try {
        manifest = json::parse(reinterpret_cast<const char*>(bytes.data() + header),
                               reinterpret_cast<const char*>(bytes.data() + header + manifest_len));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestParseError, e.what());
    }

    const std::byte* payload = bytes.data() + header + manifest_len;
    const std::uint64_t payload_len = bytes.size() - header - manifest_len;

    ModelArchive archive;
    try {
        if (manifest.at("format_version").get<int>() != kArchiveFormatVersion) {
            throw Error(ErrorKind::ManifestParseError, "unsupported format_version");
        }
        archive.meta = meta_from_json(manifest.at("meta"));

        std::unordered_set<std::string> names;
        for (const auto& entry : manifest.at("tensors")) {
            TensorRecord t;
            t.name = entry.at("name").get<std::string>();
            if (!names.insert(t.name).second) {
                throw Error(ErrorKind::ManifestParseError, "duplicate tensor '" + t.name + "'");
            }
            t.dtype = parse_dtype(entry.at("dtype").get<std::string>());
            t.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
            const auto offset = entry.at("byte_offset").get<std::uint64_t>();
            const auto length = entry.at("byte_length").get<std::uint64_t>();
            const std::size_t width = dtype_size(t.dtype);
            if (length % width != 0 || length / width != t.element_count()) {
                throw Error(ErrorKind::ShapeMismatch, t.name + ": declared shape " + shape_string(t.shape) +
                                                          " vs " + std::to_string(length) + " payload bytes");
            }
            if (offset > payload_len || length > payload_len - offset) {
                throw Error(ErrorKind::TruncatedPayload, t.name + ": payload ends before tensor data");
            }
            t.data.resize(length / width);
            const std::byte* src = payload + offset;
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                t.data[i] = t.dtype == DType::Float32 ? static_cast<double>(load_le<float>(src + i * 4))
                                                      : load_le<double>(src + i * 8);
            }
            archive.tensors.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestParseError, e.what());
    }
    return archive;
}

ModelArchive read_archive(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    std::vector<std::byte> bytes(raw.size());
    std::memcpy(bytes.data(), raw.data(), raw.size());
    return parse_archive(bytes);
}

// ---------------------------------------------------------------------------
// Validation

std::string layer_tensor_name(int layer, std::string_view name) {
    return "layer" + std::to_string(layer) + "." + std::string(name);
}

const TensorRecord& ValidatedModel::layer_tensor(int layer, std::string_view name) const {
    if (const auto* t = archive_.find(layer_tensor_name(layer, name))) return *t;
    if (archive_.meta.depth == 1) {
        if (const auto* t = archive_.find(name)) return *t;
    }
    throw Error(ErrorKind::MissingTensor, layer_tensor_name(layer, name));
}

const TensorRecord& ValidatedModel::global_tensor(std::string_view name) const {
    if (const auto* t = archive_.find(name)) return *t;
    throw Error(ErrorKind::MissingTensor, std::string(name));
}

namespace {

const TensorRecord& require(const ModelArchive& archive, int layer, std::string_view name) {
    if (const auto* t = archive.find(layer_tensor_name(layer, name))) return *t;
    if (archive.meta.depth == 1) {
        if (const auto* t = archive.find(name)) return *t;
    }
    throw Error(ErrorKind::MissingTensor, layer_tensor_name(layer, name));
}

void expect_shape(const TensorRecord& t, const std::vector<std::uint64_t>& expected) {
    if (t.shape != expected) {
        throw Error(ErrorKind::WrongShape, t.name + ": expected " + shape_string(expected) + ", got " +
                                               shape_string(t.shape));
    }
}

void check_positive(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidArgument, what);
}

} // namespace

ValidatedModel validate_archive(ModelArchive archive) {
    const ModelMeta& meta = archive.meta;
    check_positive(meta.depth >= 1, "depth must be >= 1");
    check_positive(!meta.embed_dims.empty() && !meta.token_grids.empty(), "embed_dims and token_grids required");
    if (!meta.stage_depths.empty()) {
        int total = 0;
        for (int d : meta.stage_depths) total += d;
        check_positive(total == meta.depth, "stage_depths must sum to depth");
    }
    for (const auto& g : meta.token_grids) check_positive(g.h > 0 && g.w > 0, "token grids must be positive");
    for (int d : meta.embed_dims) check_positive(d > 0, "embed dims must be positive");

    // Per-layer groups beyond depth mean the meta and the tensor set disagree.
    for (const auto& t : archive.tensors) {
        if (t.name.rfind("layer", 0) != 0) continue;
        const auto dot = t.name.find('.');
        int index = -1;
        const auto* first = t.name.data() + 5;
        const auto* last = t.name.data() + (dot == std::string::npos ? t.name.size() : dot);
        if (std::from_chars(first, last, index).ptr == last && index >= meta.depth) {
            throw Error(ErrorKind::InvalidArgument, "tensor '" + t.name + "' beyond depth " + std::to_string(meta.depth));
        }
    }

    const auto u = [](int v) { return static_cast<std::uint64_t>(v); };

    switch (meta.family) {
    case Family::ViT:
    case Family::DeiT: {
        check_positive(meta.stage_count() == 1, "vit/deit are single-stage");
        const int d = meta.embed_dims.front();
        const auto* pos = archive.find("pos_embed");
        if (!pos) throw Error(ErrorKind::MissingTensor, "pos_embed");
        expect_shape(*pos, {u(meta.tokens_of_layer(0)), u(d)});
        const int heads = meta.heads_of_layer(0);
        check_positive(heads >= 1 && d % heads == 0, "embed dim must be divisible by heads");
        for (int l = 0; l < meta.depth; ++l) {
            expect_shape(require(archive, l, "q_weight"), {u(d), u(d)});
            expect_shape(require(archive, l, "k_weight"), {u(d), u(d)});
        }
        break;
    }
    case Family::Swin: {
        check_positive(meta.window_size >= 1, "swin requires window_size");
        check_positive(!meta.has_class_token, "swin has no class token");
        for (int l = 0; l < meta.depth; ++l) {
            const auto grid = meta.grid_of_layer(l);
            const int ws = meta.window_of_layer(l);
            if (grid.h % ws != 0 || grid.w % ws != 0) {
                throw Error(ErrorKind::WrongShape, "grid not divisible by window at layer " + std::to_string(l));
            }
            const auto& table = require(archive, l, "rel_bias_table");
            const auto table_rows = u((2 * ws - 1) * (2 * ws - 1));
            if (table.shape.size() != 2 || table.shape[0] != table_rows || table.shape[1] == 0) {
                expect_shape(table, {table_rows, u(meta.heads_of_layer(l))});
            }
            const int windows = (grid.h / ws) * (grid.w / ws);
            expect_shape(require(archive, l, "attn_mask"), {u(windows), u(ws * ws), u(ws * ws)});
        }
        break;
    }
    case Family::Mixer:
        check_positive(!meta.has_class_token, "mixer has no class token");
        for (int l = 0; l < meta.depth; ++l) {
            const auto n = u(meta.grid_of_layer(l).size());
            expect_shape(require(archive, l, "token_weight"), {n, n});
        }
        break;
    case Family::MetaFormer:
        check_positive(!meta.has_class_token, "metaformer has no class token");
        if (meta.pool_kernel < 1 || meta.pool_kernel % 2 == 0) {
            throw Error(ErrorKind::BadKernel, "pool_kernel must be odd and >= 1");
        }
        break;
    }

    for (int l = 0; l < meta.depth; ++l) {
        const auto d = u(meta.embed_dim_of_layer(l));
        const auto& fc1 = require(archive, l, "fc1");
        if (fc1.shape.size() != 2 || fc1.shape[0] != d || fc1.shape[1] == 0) {
            expect_shape(fc1, {d, fc1.shape.size() == 2 ? fc1.shape[1] : 1});
        }
        expect_shape(require(archive, l, "fc2"), {fc1.shape[1], d});
    }

    return ValidatedModel(std::move(archive));
}

// ---------------------------------------------------------------------------
// Connectomes

ConnectomeGraph parse_connectome(std::string_view text, std::string name) {
    ConnectomeGraph graph;
    graph.name = std::move(name);

    std::unordered_map<std::string, std::size_t> index;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_slot;
    const auto node = [&](const std::string& label) {
        auto [it, inserted] = index.try_emplace(label, graph.labels.size());
        if (inserted) graph.labels.push_back(label);
        return it->second;
    };

    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;

        std::istringstream fields(line);
        std::string src, dst, weight_text, extra;
        fields >> src >> dst;
        if (dst.empty()) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 'src dst [weight]'");
        }
        double weight = 1.0;
        if (fields >> weight_text) {
            const char* first = weight_text.data();
            const char* last = first + weight_text.size();
            auto [ptr, ec] = std::from_chars(first, last, weight);
            if (ec != std::errc{} || ptr != last || !std::isfinite(weight) || weight <= 0.0) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad weight '" +
                                                       weight_text + "'");
            }
            if (fields >> extra) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": trailing fields");
            }
        }
        if (src == dst) {
            ++graph.self_loops_dropped;
            continue;
        }
        const auto s = node(src);
        const auto t = node(dst);
        auto [slot, fresh] = edge_slot.try_emplace({s, t}, graph.edges.size());
        if (fresh) {
            graph.edges.push_back({s, t, weight});
        } else {
            graph.edges[slot->second].weight = std::max(graph.edges[slot->second].weight, weight);
        }
    }
    graph.n = graph.labels.size();
    if (graph.edges.empty()) throw Error(ErrorKind::EmptyGraph, "'" + graph.name + "' has no edges");
    return graph;
}

ConnectomeGraph read_connectome(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::ostringstream text;
    text << file.rdbuf();
    return parse_connectome(text.str(), path.stem().string());
}

std::string format_connectome(const ConnectomeGraph& graph) {
    std::string out = "# " + graph.name + "\n";
    char buf[64];
    for (const auto& e : graph.edges) {
        auto res = std::to_chars(buf, buf + sizeof(buf), e.weight);
        out += std::to_string(e.src) + " " + std::to_string(e.dst) + " " + std::string(buf, res.ptr) + "\n";
    }
    return out;
}

} // namespace relgraph
