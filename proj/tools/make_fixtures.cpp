// Regenerates the checked-in fixtures under tests/data.
//
//   relgraph_fixtures <tests/data directory>
//
// Everything is derived from fixed seeds; rerunning reproduces the files.

#include "relgraph/model_io.hpp"
#include "relgraph/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace relgraph;

namespace {

// Multiples of 1/64 in [-1, 1]: exact in float32.
TensorRecord quantized_tensor(std::string name, std::vector<std::uint64_t> shape, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> steps(-64, 64);
    TensorRecord t{std::move(name), DType::Float32, std::move(shape), {}};
    t.data.resize(t.element_count());
    for (auto& v : t.data) v = steps(rng) / 64.0;
    return t;
}

void write_vit_tiny_l0(const fs::path& dir) {
    std::mt19937_64 rng(7);
    ModelArchive archive;
    archive.meta.family = Family::ViT;
    archive.meta.depth = 1;
    archive.meta.embed_dims = {4};
    archive.meta.token_grids = {{2, 2}};
    archive.meta.has_class_token = true;
    archive.meta.heads = {1};
    archive.tensors.push_back(quantized_tensor("pos_embed", {5, 4}, rng));
    archive.tensors.push_back(quantized_tensor("q_weight", {4, 4}, rng));
    archive.tensors.push_back(quantized_tensor("k_weight", {4, 4}, rng));
    archive.tensors.push_back(quantized_tensor("fc1", {4, 8}, rng));
    archive.tensors.push_back(quantized_tensor("fc2", {8, 4}, rng));
    write_archive(archive, dir / "vit_tiny_l0.rga");
}

// Generator minimum of the noisy parabola fixture.
constexpr double kNoisyVertex = 0.84;

void write_noisy_parabola(const fs::path& dir) {
    std::mt19937_64 rng(20221017);
    std::normal_distribution<double> noise(0.0, 0.002);
    report::CsvTable table({"x", "y"});
    for (int i = 0; i <= 40; ++i) {
        const double x = 0.80 + 0.002 * i;
        const double y = 0.92 - 30.0 * (x - kNoisyVertex) * (x - kNoisyVertex) + noise(rng);
        table.add_row({report::format_number(x), report::format_number(y)});
    }
    report::write_file_atomic(dir / "noisy_parabola.csv", table.str());
}

struct DatasetSpec {
    const char* name;
    double c_vertex;
    double l_vertex;
    double peak;
    std::uint64_t seed;
};

// Accuracy peaks at (c_vertex, l_vertex); L is placed on its own parabola
// through the noiseless accuracy so both measures share one accuracy column.
void write_sweetspot_points(const fs::path& dir) {
    const DatasetSpec specs[] = {
        {"cifar10_synth", 0.838, 1.27, 0.95, 11},
        {"animal10_synth", 0.842, 1.29, 0.90, 12},
    };
    constexpr double c_curv = 30.0, l_curv = 2.0;
    report::CsvTable table({"model_id", "dataset", "measure_c", "measure_l", "accuracy"});
    for (const auto& spec : specs) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, 0.001);
        std::uniform_real_distribution<double> offset(-0.04, 0.04);
        std::bernoulli_distribution side(0.5);
        for (int i = 0; i < 16; ++i) {
            const double c = spec.c_vertex + offset(rng);
            const double clean = spec.peak - c_curv * (c - spec.c_vertex) * (c - spec.c_vertex);
            const double spread = std::sqrt((spec.peak - clean) / l_curv);
            const double l = spec.l_vertex + (side(rng) ? spread : -spread);
            table.add_row({std::string(spec.name) + "_m" + std::to_string(i), spec.name, report::format_number(c),
                           report::format_number(l), report::format_number(clean + noise(rng))});
        }
    }
    report::write_file_atomic(dir / "sweetspot_points.csv", table.str());
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: relgraph_fixtures <tests/data directory>\n";
        return 2;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    write_vit_tiny_l0(dir);
    write_noisy_parabola(dir);
    write_sweetspot_points(dir);
    return 0;
}
