#include "relgraph/cli.hpp"

#include "relgraph/analysis.hpp"
#include "relgraph/builders.hpp"
#include "relgraph/error.hpp"
#include "relgraph/model_io.hpp"
#include "relgraph/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

namespace relgraph::cli {

namespace fs = std::filesystem;
using report::CsvTable;
using report::format_number;

namespace {

struct RunConfig {
    std::string command;
    std::string input;
    std::string tau = "auto";
    std::string tau_affine = "auto";
    std::string class_token = "keep";
    std::string head_mode = "whole";
    std::string mode = "compose";
    std::string order = "forward";
    std::string out_dir = ".";
    std::string formats = "csv,svg";
    std::string connectomes;
    std::string query;
};

struct Output {
    std::vector<std::pair<std::string, std::string>> files;
    int exit_code = kSuccess;
};

std::optional<double> parse_tau(const std::string& text) {
    if (text == "auto") return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !(value > 0.0) || !std::isfinite(value)) {
        throw Error(ErrorKind::InvalidArgument, "tau must be 'auto' or a positive number, got '" + text + "'");
    }
    return value;
}

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last) {
        throw Error(ErrorKind::ParseError, what + ": '" + text + "' is not a number");
    }
    return value;
}

std::set<std::string> parse_formats(const std::string& text) {
    std::set<std::string> formats;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item != "csv" && item != "svg" && item != "json") {
            throw Error(ErrorKind::InvalidArgument, "unknown format '" + item + "' (csv, svg, json)");
        }
        formats.insert(item);
    }
    if (formats.empty()) formats.insert("csv");
    return formats;
}

BuildOptions build_options(const RunConfig& cfg) {
    BuildOptions opts;
    opts.tau_aggregation = parse_tau(cfg.tau);
    opts.tau_affine = parse_tau(cfg.tau_affine);
    opts.class_token = cfg.class_token == "drop"  ? ClassTokenPolicy::Drop
                       : cfg.class_token == "pad" ? ClassTokenPolicy::Pad
                                                  : ClassTokenPolicy::Keep;
    opts.head_mode = cfg.head_mode == "per-head" ? HeadMode::PerHead : HeadMode::Whole;
    opts.mode = cfg.mode == "layer-mean" ? ModelMode::LayerMean : ModelMode::Compose;
    opts.order = cfg.order == "reverse" ? ComposeOrder::Reverse : ComposeOrder::Forward;
    return opts;
}

ValidatedModel load_model(const std::string& path) {
    return validate_archive(read_archive(path));
}

nlohmann::ordered_json cell_json(const std::string& cell) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (!cell.empty() && ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(value)) return value;
    return cell;
}

std::string table_json(const CsvTable& table, nlohmann::ordered_json metadata) {
    nlohmann::ordered_json doc;
    doc["metadata"] = std::move(metadata);
    doc["columns"] = table.header();
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows()) {
        nlohmann::ordered_json obj;
        for (std::size_t i = 0; i < row.size(); ++i) obj[table.header()[i]] = cell_json(row[i]);
        rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

nlohmann::ordered_json options_json(const RunConfig& cfg) {
    return {{"command", cfg.command},   {"tau", cfg.tau},       {"tau_affine", cfg.tau_affine},
            {"class_token", cfg.class_token}, {"head_mode", cfg.head_mode}, {"mode", cfg.mode},
            {"order", cfg.order}};
}

void emit_table(Output& out, const std::set<std::string>& formats, const std::string& stem, const CsvTable& table,
                nlohmann::ordered_json metadata) {
    if (formats.count("csv")) out.files.emplace_back(stem + ".csv", table.str());
    if (formats.count("json")) out.files.emplace_back(stem + ".json", table_json(table, std::move(metadata)));
}

std::vector<std::string> measure_cells(const GraphMeasures& m) {
    return {format_number(m.clustering), format_number(m.path_length), format_number(m.connected_pair_fraction)};
}

const std::vector<std::string> kMeasureHeader = {
    "scope",         "layer",    "mode",          "n_tokens",        "agg_tau",      "agg_clustering",
    "agg_path_length", "agg_connected_fraction", "n_channels", "aff_tau", "aff_clustering", "aff_path_length",
    "aff_connected_fraction"};

void add_layer_rows(CsvTable& table, const ModelMeasures& per) {
    for (const auto& l : per.layers) {
        std::vector<std::string> row = {"layer", std::to_string(l.layer), "", std::to_string(l.n_tokens),
                                        format_number(l.tau_aggregation)};
        for (auto& c : measure_cells(l.aggregation)) row.push_back(std::move(c));
        row.push_back(std::to_string(l.n_channels));
        row.push_back(format_number(l.tau_affine));
        for (auto& c : measure_cells(l.affine)) row.push_back(std::move(c));
        table.add_row(std::move(row));
    }
}

report::Chart layer_chart(const ModelMeasures& per, const std::string& title) {
    report::Chart chart;
    chart.title = title;
    chart.x_label = "layer";
    chart.y_label = "clustering coefficient C";
    chart.y2_label = "average path length L";
    report::Series c{"aggregation C", {}, report::palette()[0], true};
    report::Series l{"aggregation L", {}, report::palette()[1], true};
    l.axis = report::Axis::Right;
    for (const auto& row : per.layers) {
        c.points.push_back({static_cast<double>(row.layer), row.aggregation.clustering});
        l.points.push_back({static_cast<double>(row.layer), row.aggregation.path_length});
    }
    chart.series = {c, l};
    return chart;
}

nlohmann::ordered_json model_json(const RunConfig& cfg, const ValidatedModel& model) {
    auto meta = options_json(cfg);
    meta["archive"] = fs::path(cfg.input).filename().string();
    meta["family"] = std::string(to_string(model.meta().family));
    meta["depth"] = model.meta().depth;
    return meta;
}

// ---------------------------------------------------------------------------

Output cmd_measure(const RunConfig& cfg, const std::set<std::string>& formats, bool model_row) {
    const auto model = load_model(cfg.input);
    const auto opts = build_options(cfg);
    const auto per = per_layer_measures(model, opts);

    CsvTable table(kMeasureHeader);
    add_layer_rows(table, per);
    if (model_row) {
        const auto level = model_aggregation_measures(model, opts, &per);
        std::vector<std::string> row = {"model", "", cfg.mode, std::to_string(level.n_tokens),
                                        format_number(level.tau)};
        for (auto& c : measure_cells(level.measures)) row.push_back(std::move(c));
        row.push_back(std::to_string(per.layers.front().n_channels));
        row.push_back(format_number(per.layers.front().tau_affine));
        for (auto& c : measure_cells(per.affine_mean)) row.push_back(std::move(c));
        table.add_row(std::move(row));
    }

    Output out;
    const std::string stem = model_row ? "measures" : "layers";
    emit_table(out, formats, stem, table, model_json(cfg, model));
    if (formats.count("svg")) {
        out.files.emplace_back(stem + ".svg", report::render_svg(layer_chart(per, "Per-layer aggregation measures")));
    }
    return out;
}

CsvTable matrix_table(const Matrix& m) {
    std::vector<std::string> header = {"row"};
    for (Eigen::Index j = 0; j < m.cols(); ++j) header.push_back(std::to_string(j));
    CsvTable table(std::move(header));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row = {std::to_string(i)};
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_number(m(i, j)));
        table.add_row(std::move(row));
    }
    return table;
}

Output cmd_extract(const RunConfig& cfg, const std::set<std::string>& formats) {
    const auto model = load_model(cfg.input);
    const auto opts = build_options(cfg);
    Output out;
    for (int l = 0; l < model.meta().depth; ++l) {
        const auto agg = apply_class_token_policy(build_layer_aggregation(model, l, opts.head_mode), opts.class_token);
        auto meta = model_json(cfg, model);
        meta["layer"] = l;
        meta["graph"] = "aggregation";
        emit_table(out, formats, "layer" + std::to_string(l) + "_aggregation", matrix_table(agg.graph.weights), meta);
        meta["graph"] = "affine";
        emit_table(out, formats, "layer" + std::to_string(l) + "_affine",
                   matrix_table(build_layer_affine(model, l).weights), meta);
    }
    return out;
}

Output cmd_compose(const RunConfig& cfg, const std::set<std::string>& formats) {
    const auto model = load_model(cfg.input);
    const auto opts = build_options(cfg);
    const auto final_graph = composed_aggregation(model, opts);
    const double tau = opts.tau_aggregation.value_or(auto_threshold(final_graph.n()));
    const auto m = graph_measures(final_graph, tau);

    Output out;
    const auto meta = model_json(cfg, model);
    emit_table(out, formats, "composed_graph", matrix_table(final_graph.weights), meta);
    CsvTable table({"n_tokens", "tau", "clustering", "path_length", "connected_fraction"});
    std::vector<std::string> row = {std::to_string(final_graph.n()), format_number(tau)};
    for (auto& c : measure_cells(m)) row.push_back(std::move(c));
    table.add_row(std::move(row));
    emit_table(out, formats, "composed_measures", table, meta);
    return out;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

Output cmd_compare_bnn(const RunConfig& cfg, const std::set<std::string>& formats, std::ostream& err) {
    GraphMeasures query;
    auto meta = options_json(cfg);
    if (!cfg.query.empty()) {
        const auto comma = cfg.query.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--query expects C,L");
        query.clustering = parse_double(cfg.query.substr(0, comma), "--query");
        query.path_length = parse_double(cfg.query.substr(comma + 1), "--query");
        query.connected_pair_fraction = 1.0;
        meta["query_source"] = "flag";
    } else if (!cfg.input.empty()) {
        const auto model = load_model(cfg.input);
        query = model_aggregation_measures(model, build_options(cfg)).measures;
        meta["query_source"] = fs::path(cfg.input).filename().string();
    } else {
        throw Error(ErrorKind::InvalidArgument, "compare-bnn needs an archive or --query C,L");
    }
    if (cfg.connectomes.empty()) throw Error(ErrorKind::InvalidArgument, "--connectomes DIR is required");

    std::vector<ConnectomeGraph> graphs;
    for (const auto& file : sorted_files(cfg.connectomes)) {
        try {
            auto g = read_connectome(file);
            if (g.self_loops_dropped) {
                err << "note: " << file.filename().string() << ": dropped " << g.self_loops_dropped << " self-loops\n";
            }
            if (g.n < 2) throw Error(ErrorKind::EmptyGraph, "fewer than 2 nodes");
            graphs.push_back(std::move(g));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Io) throw;
            err << "warning: skipping " << file.filename().string() << ": " << e.what() << "\n";
        }
    }
    if (graphs.empty()) throw Error(ErrorKind::EmptyList, "no connectome in '" + cfg.connectomes + "' could be parsed");

    const auto ranked = bnn_distance(query, graphs);
    CsvTable table({"name", "clustering", "path_length", "distance"});
    for (const auto& e : ranked.ranked) {
        table.add_row({e.name, format_number(e.measures.clustering), format_number(e.measures.path_length),
                       format_number(e.distance)});
    }
    meta["query_clustering"] = query.clustering;
    meta["query_path_length"] = query.path_length;

    Output out;
    emit_table(out, formats, "bnn_similarity", table, meta);
    if (formats.count("svg")) {
        report::Chart chart;
        chart.title = "Graph measures: query vs biological networks";
        chart.x_label = "clustering coefficient C";
        chart.y_label = "average path length L";
        for (std::size_t i = 0; i < ranked.ranked.size(); ++i) {
            const auto& e = ranked.ranked[i];
            chart.series.push_back({e.name, {{e.measures.clustering, e.measures.path_length}},
                                    report::palette()[(i + 1) % report::palette().size()]});
        }
        chart.series.push_back({"query", {{query.clustering, query.path_length}}, "#d62728", false, true});
        out.files.emplace_back("bnn_similarity.svg", report::render_svg(chart));
    }
    return out;
}

Output cmd_sweetspot(const RunConfig& cfg, const std::set<std::string>& formats, std::ostream& err) {
    std::ifstream in(cfg.input, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + cfg.input + "'");
    std::stringstream text;
    text << in.rdbuf();
    const auto table = report::parse_csv(text.str());

    const auto column = [&](const std::string& name) {
        const auto& h = table.header();
        const auto it = std::find(h.begin(), h.end(), name);
        if (it == h.end()) throw Error(ErrorKind::ParseError, "missing column '" + name + "'");
        return static_cast<std::size_t>(it - h.begin());
    };
    const auto c_id = column("model_id"), c_ds = column("dataset"), c_c = column("measure_c"),
               c_l = column("measure_l"), c_acc = column("accuracy");

    std::map<std::string, std::vector<MeasurePoint>> by_dataset;
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        const auto& row = table.rows()[r];
        const std::string where = "row " + std::to_string(r + 2);
        MeasurePoint p{row[c_id], row[c_ds], parse_double(row[c_c], where), parse_double(row[c_l], where),
                       parse_double(row[c_acc], where), std::nullopt};
        if (!std::isfinite(p.measure_c) || !std::isfinite(p.measure_l)) {
            throw Error(ErrorKind::ParseError, where + ": measures must be finite");
        }
        if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) {
            throw Error(ErrorKind::ParseError, where + ": accuracy outside [0, 1]");
        }
        by_dataset[p.dataset].push_back(std::move(p));
    }
    if (by_dataset.empty()) throw Error(ErrorKind::ParseError, "no data rows");

    Output out;
    CsvTable fits_table({"dataset", "measure", "points", "a", "b", "c", "extremum_x", "curvature", "r_squared",
                         "pearson_r", "t_statistic", "flag"});
    CsvTable spot_table({"kind", "measure", "low", "high", "datasets", "flag"});
    bool degenerate = false;

    for (const auto measure : {MeasureName::Clustering, MeasureName::PathLength}) {
        std::vector<QuadraticFit> fits;
        std::vector<std::string> names;
        bool measure_degenerate = false;
        report::Chart chart;
        chart.title = "Accuracy vs " + std::string(to_string(measure));
        chart.x_label = measure == MeasureName::Clustering ? "clustering coefficient C" : "average path length L";
        chart.y_label = "accuracy";

        std::size_t color = 0;
        for (const auto& [dataset, points] : by_dataset) {
            std::vector<XY> xy;
            for (const auto& p : points) {
                xy.push_back({measure == MeasureName::Clustering ? p.measure_c : p.measure_l, p.accuracy});
            }
            std::vector<std::string> row = {dataset, std::string(to_string(measure)), std::to_string(xy.size())};
            std::string flag;
            std::optional<QuadraticFit> fit;
            try {
                fit = fit_quadratic(xy);
                for (double v : {fit->a, fit->b, fit->c, fit->extremum_x}) row.push_back(format_number(v));
                row.push_back(std::string(to_string(fit->curvature)));
                row.push_back(format_number(fit->r_squared));
                if (fit->curvature == Curvature::Degenerate) flag = "degenerate_fit";
            } catch (const Error& e) {
                for (int i = 0; i < 4; ++i) row.push_back("nan");
                row.push_back("degenerate");
                row.push_back("nan");
                flag = std::string(to_string(e.kind()));
            }
            try {
                const auto corr = linear_correlation(xy);
                row.push_back(format_number(corr.pearson_r));
                row.push_back(format_number(corr.t_statistic));
            } catch (const Error& e) {
                row.push_back("nan");
                row.push_back("nan");
                flag += (flag.empty() ? "" : ";") + std::string(to_string(e.kind()));
            }
            row.push_back(flag);
            fits_table.add_row(std::move(row));

            if (fit && fit->curvature != Curvature::Degenerate) {
                fits.push_back(*fit);
                names.push_back(dataset);
            } else {
                measure_degenerate = true;
            }

            const auto& col = report::palette()[color++ % report::palette().size()];
            chart.series.push_back({dataset, xy, col});
            if (fit && fit->curvature != Curvature::Degenerate) {
                const auto [lo, hi] = std::minmax_element(xy.begin(), xy.end(),
                                                          [](const XY& a, const XY& b) { return a.x < b.x; });
                report::Series curve{"", {}, col, true};
                constexpr int samples = 64;
                for (int s = 0; s <= samples; ++s) {
                    const double x = lo->x + (hi->x - lo->x) * s / samples;
                    curve.points.push_back({x, (*fit)(x)});
                }
                chart.series.push_back(std::move(curve));
            }
        }

        std::string joined;
        for (const auto& n : names) joined += (joined.empty() ? "" : ";") + n;
        if (measure_degenerate) {
            degenerate = true;
            spot_table.add_row({"fitted", std::string(to_string(measure)), "nan", "nan", joined, "degenerate_fit"});
        } else if (fits.size() == 1) {
            err << "warning: only one dataset; " << to_string(measure) << " sweet spot has zero width\n";
            spot_table.add_row({"fitted", std::string(to_string(measure)), format_number(fits[0].extremum_x),
                                format_number(fits[0].extremum_x), joined, "single_dataset"});
        } else {
            const auto spot = sweet_spot(fits, measure, names);
            spot_table.add_row({"fitted", std::string(to_string(measure)), format_number(spot.low),
                                format_number(spot.high), joined, ""});
        }
        if (formats.count("svg")) {
            out.files.emplace_back("sweetspot_" + std::string(to_string(measure)) + ".svg", report::render_svg(chart));
        }
    }
    spot_table.add_row({"reference", "clustering", format_number(kReferenceClusteringSweetSpot.first),
                        format_number(kReferenceClusteringSweetSpot.second), "", "reported"});
    spot_table.add_row({"reference", "path_length", format_number(kReferencePathLengthSweetSpot.first),
                        format_number(kReferencePathLengthSweetSpot.second), "", "reported"});

    auto meta = options_json(cfg);
    meta["points"] = fs::path(cfg.input).filename().string();
    emit_table(out, formats, "sweetspot_fits", fits_table, meta);
    emit_table(out, formats, "sweetspot", spot_table, meta);
    if (degenerate) {
        err << "warning: degenerate fit(s); report flagged\n";
        out.exit_code = kDegenerate;
    }
    return out;
}

Output cmd_track(const RunConfig& cfg, const std::set<std::string>& formats, std::ostream& err) {
    static const std::regex epoch_suffix(R"(_e(\d+)\.rga$)");
    std::vector<Checkpoint> checkpoints;
    for (const auto& file : sorted_files(cfg.input)) {
        const std::string name = file.filename().string();
        std::smatch match;
        const bool tagged = std::regex_search(name, match, epoch_suffix);
        if (file.extension() != ".rga") continue;
        try {
            auto model = load_model(file.string());
            std::optional<int> epoch = model.meta().epoch;
            if (!epoch && tagged) epoch = std::stoi(match[1].str());
            if (!epoch) {
                err << "warning: skipping " << name << ": no epoch in name or manifest\n";
                continue;
            }
            checkpoints.push_back({*epoch, std::move(model)});
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Io) throw;
            err << "warning: skipping " << name << ": " << e.what() << "\n";
        }
    }
    if (checkpoints.empty()) throw Error(ErrorKind::EmptyList, "no checkpoint archive in '" + cfg.input + "' parsed");
    std::stable_sort(checkpoints.begin(), checkpoints.end(),
                     [](const Checkpoint& a, const Checkpoint& b) { return a.epoch < b.epoch; });
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        if (checkpoints[i].epoch == checkpoints[i - 1].epoch) {
            throw Error(ErrorKind::InvalidArgument, "duplicate epoch " + std::to_string(checkpoints[i].epoch));
        }
        if (checkpoints[i].epoch != checkpoints[i - 1].epoch + 1) {
            err << "warning: epochs " << checkpoints[i - 1].epoch << " and " << checkpoints[i].epoch
                << " are not contiguous\n";
        }
    }

    const auto rows = training_series(checkpoints, build_options(cfg));
    CsvTable table({"epoch", "agg_tau", "agg_clustering", "agg_path_length", "agg_connected_fraction", "aff_tau",
                    "aff_clustering", "aff_path_length", "aff_connected_fraction"});
    for (const auto& r : rows) {
        std::vector<std::string> row = {std::to_string(r.epoch), format_number(r.tau_aggregation)};
        for (auto& c : measure_cells(r.aggregation)) row.push_back(std::move(c));
        row.push_back(format_number(r.tau_affine));
        for (auto& c : measure_cells(r.affine)) row.push_back(std::move(c));
        table.add_row(std::move(row));
    }

    Output out;
    auto meta = options_json(cfg);
    meta["checkpoints"] = rows.size();
    emit_table(out, formats, "track", table, meta);
    if (formats.count("svg")) {
        report::Chart chart;
        chart.title = "Graph measures over training";
        chart.x_label = "epoch";
        chart.y_label = "clustering coefficient C";
        chart.y2_label = "average path length L";
        report::Series c{"aggregation C", {}, report::palette()[0], true};
        report::Series l{"aggregation L", {}, report::palette()[1], true};
        l.axis = report::Axis::Right;
        report::Series ac{"affine C", {}, report::palette()[2], true};
        report::Series al{"affine L", {}, report::palette()[3], true};
        al.axis = report::Axis::Right;
        for (const auto& r : rows) {
            const auto e = static_cast<double>(r.epoch);
            c.points.push_back({e, r.aggregation.clustering});
            l.points.push_back({e, r.aggregation.path_length});
            ac.points.push_back({e, r.affine.clustering});
            al.points.push_back({e, r.affine.path_length});
        }
        chart.series = {c, l, ac, al};
        out.files.emplace_back("track.svg", report::render_svg(chart));
    }
    return out;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io: return kIoError;
    case ErrorKind::DegenerateFit: return kDegenerate;
    default: return kInputError;
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Relational graph analysis of vision-transformer weights", "relgraph"};
    app.require_subcommand(1, 1);

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--format", cfg.formats, "Comma-separated subset of csv,svg,json")->capture_default_str();
    };
    const auto add_graph = [&](CLI::App* sub) {
        sub->add_option("--tau", cfg.tau, "Aggregation threshold or 'auto' (1/n)")->capture_default_str();
        sub->add_option("--tau-affine", cfg.tau_affine, "Affine threshold or 'auto' (1/channels)")
            ->capture_default_str();
        sub->add_option("--class-token", cfg.class_token, "Class-token policy")
            ->check(CLI::IsMember({"keep", "drop", "pad"}))
            ->capture_default_str();
        sub->add_option("--head-mode", cfg.head_mode, "Attention logits: whole matrix or per head")
            ->check(CLI::IsMember({"whole", "per-head"}))
            ->capture_default_str();
        sub->add_option("--mode", cfg.mode, "Model-level aggregation: composed product or layer mean")
            ->check(CLI::IsMember({"compose", "layer-mean"}))
            ->capture_default_str();
        sub->add_option("--order", cfg.order, "Layer product order for composition")
            ->check(CLI::IsMember({"forward", "reverse"}))
            ->capture_default_str();
        add_common(sub);
    };

    auto* extract = app.add_subcommand("extract", "Write per-layer aggregation and affine matrices");
    extract->add_option("archive", cfg.input, "Model archive (.rga)")->required();
    add_graph(extract);
    auto* measure = app.add_subcommand("measure", "Per-layer and model-level graph measures");
    measure->add_option("archive", cfg.input, "Model archive (.rga)")->required();
    add_graph(measure);
    auto* layers = app.add_subcommand("layers", "Per-layer graph measures");
    layers->add_option("archive", cfg.input, "Model archive (.rga)")->required();
    add_graph(layers);
    auto* compose = app.add_subcommand("compose", "Composed model aggregation graph and its measures");
    compose->add_option("archive", cfg.input, "Model archive (.rga)")->required();
    add_graph(compose);
    auto* compare = app.add_subcommand("compare-bnn", "Rank biological networks by measure distance");
    compare->add_option("archive", cfg.input, "Model archive (.rga)");
    compare->add_option("--connectomes", cfg.connectomes, "Directory of edge-list files")->required();
    compare->add_option("--query", cfg.query, "Query measures 'C,L' instead of an archive");
    add_graph(compare);
    auto* sweet = app.add_subcommand("sweetspot", "Quadratic accuracy fits and sweet-spot intervals");
    sweet->add_option("points", cfg.input, "CSV with model_id,dataset,measure_c,measure_l,accuracy")->required();
    add_common(sweet);
    auto* track = app.add_subcommand("track", "Graph measures across epoch checkpoints");
    track->add_option("directory", cfg.input, "Directory of *_e<N>.rga archives")->required();
    add_graph(track);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }
    cfg.command = app.get_subcommands().front()->get_name();

    Output result;
    try {
        const auto formats = parse_formats(cfg.formats);
        if (cfg.command == "extract") result = cmd_extract(cfg, formats);
        else if (cfg.command == "measure") result = cmd_measure(cfg, formats, true);
        else if (cfg.command == "layers") result = cmd_measure(cfg, formats, false);
        else if (cfg.command == "compose") result = cmd_compose(cfg, formats);
        else if (cfg.command == "compare-bnn") result = cmd_compare_bnn(cfg, formats, err);
        else if (cfg.command == "sweetspot") result = cmd_sweetspot(cfg, formats, err);
        else result = cmd_track(cfg, formats, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }

    try {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create '" + cfg.out_dir + "': " + ec.message());
        for (const auto& [name, content] : result.files) {
            report::write_file_atomic(fs::path(cfg.out_dir) / name, content);
            out << (fs::path(cfg.out_dir) / name).string() << "\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    }
    return result.exit_code;
}

} // namespace relgraph::cli
