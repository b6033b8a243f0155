#include "relgraph/cli.hpp"
#include "relgraph/model_io.hpp"
#include "relgraph/report.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
namespace ts = testsupport;
using relgraph::report::CsvTable;
using relgraph::report::parse_csv;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = relgraph::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

CsvTable csv(const fs::path& path) { return parse_csv(ts::read_text(path)); }

std::size_t column(const CsvTable& t, const std::string& name) {
    const auto& h = t.header();
    return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
}

// One shared copy of the large synthetic archives.
const fs::path& vit_tiny_path() {
    static const fs::path path = [] {
        const auto dir = ts::fresh_temp_dir("cli_models");
        relgraph::write_archive(ts::vit_tiny_archive(42), dir / "vit_tiny.rga");
        relgraph::write_archive(ts::metaformer_archive(), dir / "metaformer.rga");
        return dir / "vit_tiny.rga";
    }();
    return path;
}

fs::path metaformer_path() { return vit_tiny_path().parent_path() / "metaformer.rga"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

} // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"measure", "x.rga", "--no-such-flag"}).code, 2);
    EXPECT_EQ(run({"measure", "x.rga", "--class-token", "sometimes"}).code, 2);
}

TEST(Cli, MeasureTinyHasTwelveLayerRowsAndModelRow) {
    const auto out = ts::fresh_temp_dir("cli_measure");
    const auto r = run({"measure", vit_tiny_path().string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv(out / "measures.csv");
    ASSERT_EQ(t.rows().size(), 13u);
    const auto scope = column(t, "scope"), tokens = column(t, "n_tokens"), tau = column(t, "agg_tau");
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_EQ(t.rows()[i][scope], "layer");
        EXPECT_EQ(t.rows()[i][tokens], "197");
    }
    EXPECT_EQ(t.rows()[12][scope], "model");
    EXPECT_EQ(t.rows()[12][tokens], "197");
    EXPECT_NEAR(std::stod(t.rows()[12][tau]), 1.0 / 197, 1e-10);
    EXPECT_NEAR(std::stod(t.rows()[0][column(t, "aff_tau")]), 1.0 / 192, 1e-10);
    EXPECT_TRUE(fs::exists(out / "measures.svg"));
}

TEST(Cli, MetaformerMeasureIsByteIdenticalAcrossRuns) {
    const auto a = ts::fresh_temp_dir("cli_det_a"), b = ts::fresh_temp_dir("cli_det_b");
    ASSERT_EQ(run({"measure", metaformer_path().string(), "--out", a.string()}).code, 0);
    ASSERT_EQ(run({"measure", metaformer_path().string(), "--out", b.string()}).code, 0);
    EXPECT_EQ(ts::read_text(a / "measures.csv"), ts::read_text(b / "measures.csv"));
    EXPECT_EQ(ts::read_text(a / "measures.svg"), ts::read_text(b / "measures.svg"));
}

TEST(Cli, InputsAreNotModified) {
    const auto before = ts::read_text(ts::data_dir() / "vit_tiny_l0.rga");
    const auto out = ts::fresh_temp_dir("cli_readonly");
    ASSERT_EQ(run({"extract", (ts::data_dir() / "vit_tiny_l0.rga").string(), "--out", out.string()}).code, 0);
    EXPECT_EQ(ts::read_text(ts::data_dir() / "vit_tiny_l0.rga"), before);
    const auto agg = csv(out / "layer0_aggregation.csv");
    EXPECT_EQ(agg.rows().size(), 5u);
    EXPECT_EQ(csv(out / "layer0_affine.csv").rows().size(), 4u);
}

TEST(Cli, CorruptedArchiveLeavesNoOutput) {
    const auto dir = ts::fresh_temp_dir("cli_corrupt");
    auto bytes = ts::read_text(ts::data_dir() / "vit_tiny_l0.rga");
    bytes.resize(bytes.size() - 10);
    write_text(dir / "broken.rga", bytes);
    const auto out = dir / "out";
    const auto r = run({"measure", (dir / "broken.rga").string(), "--out", out.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("TruncatedPayload"), std::string::npos);
    EXPECT_FALSE(fs::exists(out / "measures.csv"));
    EXPECT_FALSE(fs::exists(out / "measures.csv.tmp"));
}

TEST(Cli, ValidationFailureIsInputError) {
    const auto dir = ts::fresh_temp_dir("cli_invalid");
    auto a = ts::mixer_archive(1);
    a.tensors.pop_back();
    relgraph::write_archive(a, dir / "m.rga");
    EXPECT_EQ(run({"measure", (dir / "m.rga").string(), "--out", (dir / "o").string()}).code, 2);
}

TEST(Cli, MissingArchiveIsIoError) {
    EXPECT_EQ(run({"measure", "/nonexistent/model.rga", "--out", "/tmp"}).code, 3);
}

TEST(Cli, UnwritableOutputIsIoError) {
    const auto dir = ts::fresh_temp_dir("cli_unwritable");
    write_text(dir / "file", "x");
    const auto r = run({"layers", (ts::data_dir() / "vit_tiny_l0.rga").string(), "--out", (dir / "file" / "sub").string()});
    EXPECT_EQ(r.code, 3);
}

TEST(Cli, ComposeAndJsonFormat) {
    const auto out = ts::fresh_temp_dir("cli_compose");
    const auto r = run({"compose", metaformer_path().string(), "--out", out.string(), "--format", "csv,json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = csv(out / "composed_measures.csv");
    EXPECT_EQ(m.rows()[0][0], "196");
    EXPECT_NEAR(std::stod(m.rows()[0][2]), 0.744702041, 1e-9);
    EXPECT_NEAR(std::stod(m.rows()[0][3]), 1.75102041, 1e-8);
    const auto doc = nlohmann::json::parse(ts::read_text(out / "composed_measures.json"));
    EXPECT_EQ(doc["metadata"]["family"], "metaformer");
    EXPECT_EQ(doc["rows"][0]["n_tokens"], 196);
    EXPECT_FALSE(fs::exists(out / "composed_measures.svg"));
    EXPECT_EQ(run({"compose", metaformer_path().string(), "--format", "xml"}).code, 2);
}

TEST(Cli, LayerMeanMode) {
    const auto out = ts::fresh_temp_dir("cli_layer_mean");
    ASSERT_EQ(run({"measure", metaformer_path().string(), "--out", out.string(), "--mode", "layer-mean"}).code, 0);
    const auto t = csv(out / "measures.csv");
    const auto c = column(t, "agg_clustering");
    EXPECT_EQ(t.rows().back()[column(t, "mode")], "layer-mean");
    EXPECT_EQ(t.rows().back()[c], t.rows()[0][c]);
}

TEST(Cli, CompareBnnRanksThreeConnectomes) {
    const auto out = ts::fresh_temp_dir("cli_bnn");
    const auto r = run({"compare-bnn", "--query", "0.5,1.5", "--connectomes", (ts::data_dir() / "connectomes").string(),
                        "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv(out / "bnn_similarity.csv");
    ASSERT_EQ(t.rows().size(), 3u);
    EXPECT_EQ(t.rows()[0][0], "toy_rat");
    double previous = -1;
    for (const auto& row : t.rows()) {
        EXPECT_GE(std::stod(row[3]), previous);
        previous = std::stod(row[3]);
    }
    EXPECT_TRUE(fs::exists(out / "bnn_similarity.svg"));
}

TEST(Cli, CompareBnnExactMatchFirst) {
    const auto out = ts::fresh_temp_dir("cli_bnn_match");
    const auto r = run({"compare-bnn", "--query", "0,1.66666666666666667", "--connectomes",
                        (ts::data_dir() / "connectomes").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv(out / "bnn_similarity.csv");
    EXPECT_EQ(t.rows()[0][0], "toy_cat");
    EXPECT_EQ(t.rows()[0][3], "0");
}

TEST(Cli, CompareBnnFromArchive) {
    const auto out = ts::fresh_temp_dir("cli_bnn_archive");
    const auto r = run({"compare-bnn", metaformer_path().string(), "--connectomes",
                        (ts::data_dir() / "connectomes").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(csv(out / "bnn_similarity.csv").rows().size(), 3u);
}

TEST(Cli, CompareBnnEmptyOrMissingDirectory) {
    const auto empty = ts::fresh_temp_dir("cli_bnn_empty");
    EXPECT_EQ(run({"compare-bnn", "--query", "0.5,1.5", "--connectomes", empty.string(), "--out", empty.string()}).code, 2);
    write_text(empty / "junk.txt", "not an edge list\n");
    EXPECT_EQ(run({"compare-bnn", "--query", "0.5,1.5", "--connectomes", empty.string(), "--out", empty.string()}).code, 2);
    EXPECT_EQ(run({"compare-bnn", "--query", "0.5,1.5", "--connectomes", "/nonexistent/dir"}).code, 3);
}

TEST(Cli, SweetspotFixtureIntervals) {
    const auto out = ts::fresh_temp_dir("cli_sweet");
    const auto r = run({"sweetspot", (ts::data_dir() / "sweetspot_points.csv").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv(out / "sweetspot.csv");
    ASSERT_EQ(t.rows().size(), 4u);
    const auto& c = t.rows()[0];
    const auto& l = t.rows()[1];
    EXPECT_EQ(c[1], "clustering");
    EXPECT_LE(std::stod(c[2]), 0.84);
    EXPECT_GE(std::stod(c[3]), 0.84);
    EXPECT_EQ(l[1], "path_length");
    EXPECT_LE(std::stod(l[2]), 1.28);
    EXPECT_GE(std::stod(l[3]), 1.28);
    EXPECT_EQ(t.rows()[2], (std::vector<std::string>{"reference", "clustering", "0.839", "0.842", "", "reported"}));
    EXPECT_EQ(t.rows()[3], (std::vector<std::string>{"reference", "path_length", "1.256", "1.307", "", "reported"}));
    EXPECT_EQ(csv(out / "sweetspot_fits.csv").rows().size(), 4u);
}

TEST(Cli, SweetspotSingleDataset) {
    const auto dir = ts::fresh_temp_dir("cli_sweet_single");
    std::string text = "model_id,dataset,measure_c,measure_l,accuracy\n";
    for (int i = 0; i < 7; ++i) {
        const double x = 0.80 + 0.01 * i;
        text += "m" + std::to_string(i) + ",only," + std::to_string(x) + "," + std::to_string(1 + x) + "," +
                std::to_string(0.9 - 5 * (x - 0.83) * (x - 0.83)) + "\n";
    }
    write_text(dir / "points.csv", text);
    const auto r = run({"sweetspot", (dir / "points.csv").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    const auto t = csv(dir / "sweetspot.csv");
    EXPECT_EQ(t.rows()[0][2], t.rows()[0][3]);
    EXPECT_EQ(t.rows()[0][5], "single_dataset");
}

TEST(Cli, SweetspotDegenerateAndMalformed) {
    const auto dir = ts::fresh_temp_dir("cli_sweet_bad");
    std::string text = "model_id,dataset,measure_c,measure_l,accuracy\n";
    for (int i = 0; i < 5; ++i) text += "m,lin," + std::to_string(0.1 * i) + "," + std::to_string(0.1 * i) + "," +
                                        std::to_string(0.1 + 0.1 * i) + "\n";
    write_text(dir / "linear.csv", text);
    const auto r = run({"sweetspot", (dir / "linear.csv").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 4);
    EXPECT_TRUE(fs::exists(dir / "sweetspot.csv"));
    EXPECT_EQ(csv(dir / "sweetspot.csv").rows()[0][5], "degenerate_fit");

    write_text(dir / "bad.csv", "model_id,dataset,measure_c\nx,y,1\n");
    EXPECT_EQ(run({"sweetspot", (dir / "bad.csv").string(), "--out", dir.string()}).code, 2);
    write_text(dir / "bad2.csv", "model_id,dataset,measure_c,measure_l,accuracy\nx,y,abc,1,0.5\n");
    EXPECT_EQ(run({"sweetspot", (dir / "bad2.csv").string(), "--out", dir.string()}).code, 2);
}

TEST(Cli, TrackSortsEpochs) {
    const auto dir = ts::fresh_temp_dir("cli_track");
    relgraph::write_archive(ts::vit_tiny_archive(1, 1), dir / "run_e10.rga");
    relgraph::write_archive(ts::vit_tiny_archive(2, 1), dir / "run_e0.rga");
    relgraph::write_archive(ts::vit_tiny_archive(3, 1), dir / "run_e5.rga");
    write_text(dir / "notes.txt", "ignored");
    const auto out = dir / "out";
    const auto r = run({"track", dir.string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("not contiguous"), std::string::npos);
    const auto t = csv(out / "track.csv");
    ASSERT_EQ(t.rows().size(), 3u);
    EXPECT_EQ(t.rows()[0][0], "0");
    EXPECT_EQ(t.rows()[1][0], "5");
    EXPECT_EQ(t.rows()[2][0], "10");
    EXPECT_TRUE(fs::exists(out / "track.svg"));
}

TEST(Cli, TrackIdenticalCheckpointsGiveConstantColumns) {
    const auto dir = ts::fresh_temp_dir("cli_track_same");
    for (int e : {0, 1, 2}) relgraph::write_archive(ts::vit_tiny_archive(7, 1), dir / ("m_e" + std::to_string(e) + ".rga"));
    const auto out = dir / "out";
    ASSERT_EQ(run({"track", dir.string(), "--out", out.string()}).code, 0);
    const auto t = csv(out / "track.csv");
    for (std::size_t c = 1; c < t.header().size(); ++c)
        for (const auto& row : t.rows()) EXPECT_EQ(row[c], t.rows()[0][c]) << t.header()[c];
}

TEST(Cli, TrackDuplicateEpochs) {
    const auto dir = ts::fresh_temp_dir("cli_track_dup");
    relgraph::write_archive(ts::vit_tiny_archive(1, 1), dir / "a_e3.rga");
    auto b = ts::vit_tiny_archive(2, 1);
    b.meta.epoch = 3;
    relgraph::write_archive(b, dir / "b_e4.rga");
    EXPECT_EQ(run({"track", dir.string(), "--out", (dir / "out").string()}).code, 2);
    EXPECT_FALSE(fs::exists(dir / "out" / "track.csv"));
}

TEST(Cli, TrackWithNothingParseable) {
    const auto dir = ts::fresh_temp_dir("cli_track_none");
    write_text(dir / "x_e1.rga", "garbage");
    const auto r = run({"track", dir.string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
}
