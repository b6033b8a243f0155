#include "relgraph/analysis.hpp"

#include "relgraph/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace relgraph {

std::string_view to_string(Curvature curvature) {
    switch (curvature) {
    case Curvature::Min: return "min";
    case Curvature::Max: return "max";
    case Curvature::Degenerate: return "degenerate";
    }
    return "degenerate";
}

std::string_view to_string(MeasureName name) {
    return name == MeasureName::Clustering ? "clustering" : "path_length";
}

QuadraticFit fit_quadratic(std::span<const XY> points) {
    if (points.size() < 3) throw Error(ErrorKind::InsufficientPoints, "need at least 3 points");
    std::set<double> distinct;
    double y_scale = 0.0;
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorKind::NonFiniteInput, "non-finite point");
        distinct.insert(p.x);
        y_scale = std::max(y_scale, std::abs(p.y));
    }
    if (distinct.size() < 3) throw Error(ErrorKind::RankDeficient, "need at least 3 distinct x values");

    const auto n = static_cast<double>(points.size());
    double mean = 0.0;
    for (const auto& p : points) mean += p.x;
    mean /= n;
    double var = 0.0;
    for (const auto& p : points) var += (p.x - mean) * (p.x - mean);
    const double sd = std::sqrt(var / n);

    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        const double z = (p.x - mean) / sd;
        const Eigen::Vector3d row(1.0, z, z * z);
        normal += row * row.transpose();
        rhs += row * p.y;
    }
    const Eigen::Vector3d beta = normal.ldlt().solve(rhs);
    if (!beta.allFinite()) throw Error(ErrorKind::RankDeficient, "normal equations are singular");
    const double alpha0 = beta(0), alpha1 = beta(1), alpha2 = beta(2);

    QuadraticFit fit;
    fit.points = points.size();
    fit.a = alpha2 / (sd * sd);
    fit.b = alpha1 / sd - 2.0 * alpha2 * mean / (sd * sd);
    fit.c = alpha0 - alpha1 * mean / sd + alpha2 * mean * mean / (sd * sd);

    if (std::abs(alpha2) <= 1e-12 * std::max(1.0, y_scale)) {
        fit.curvature = Curvature::Degenerate;
        fit.extremum_x = std::numeric_limits<double>::quiet_NaN();
    } else {
        fit.curvature = alpha2 > 0.0 ? Curvature::Min : Curvature::Max;
        fit.extremum_x = mean - alpha1 * sd / (2.0 * alpha2);
    }

    double y_mean = 0.0;
    for (const auto& p : points) y_mean += p.y;
    y_mean /= n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& p : points) {
        const double z = (p.x - mean) / sd;
        const double r = p.y - (alpha0 + alpha1 * z + alpha2 * z * z);
        ss_res += r * r;
        ss_tot += (p.y - y_mean) * (p.y - y_mean);
    }
    fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return fit;
}

SweetSpot sweet_spot(std::span<const QuadraticFit> fits, MeasureName measure, std::vector<std::string> datasets,
                     std::optional<Curvature> orientation) {
    if (fits.size() < 2) throw Error(ErrorKind::TooFewDatasets, "sweet spot needs fits from >= 2 datasets");
    SweetSpot spot;
    spot.measure = measure;
    spot.low = std::numeric_limits<double>::infinity();
    spot.high = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& fit = fits[i];
        if (fit.curvature == Curvature::Degenerate) {
            throw Error(ErrorKind::DegenerateFit, "fit " + std::to_string(i) + " has no extremum");
        }
        if (orientation && fit.curvature != *orientation) {
            throw Error(ErrorKind::DegenerateFit, "fit " + std::to_string(i) + " has a " +
                                                      std::string(to_string(fit.curvature)) + " instead of a " +
                                                      std::string(to_string(*orientation)));
        }
        spot.low = std::min(spot.low, fit.extremum_x);
        spot.high = std::max(spot.high, fit.extremum_x);
    }
    spot.datasets_used = std::move(datasets);
    return spot;
}

Correlation linear_correlation(std::span<const XY> points) {
    if (points.size() < 3) throw Error(ErrorKind::InsufficientPoints, "need at least 3 points");
    const auto n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        sxx += (p.x - mx) * (p.x - mx);
        syy += (p.y - my) * (p.y - my);
        sxy += (p.x - mx) * (p.y - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ConstantSeries, "x or y has zero variance");

    Correlation out;
    out.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double denom = 1.0 - out.pearson_r * out.pearson_r;
    out.t_statistic = denom > 0.0 ? out.pearson_r * std::sqrt((n - 2.0) / denom)
                                  : std::copysign(std::numeric_limits<double>::infinity(), out.pearson_r);
    return out;
}

// ---------------------------------------------------------------------------

BinaryGraph connectome_binary(const ConnectomeGraph& connectome) {
    BinaryGraph g(connectome.n);
    for (const auto& e : connectome.edges) {
        if (e.weight > 0.0) g.add_edge(e.src, e.dst);
    }
    return g;
}

GraphMeasures connectome_measures(const ConnectomeGraph& connectome) {
    if (connectome.n < 2) throw Error(ErrorKind::InvalidArgument, "'" + connectome.name + "' has fewer than 2 nodes");
    return measure_binary(connectome_binary(connectome));
}

double measure_distance(const GraphMeasures& a, const GraphMeasures& b) {
    return std::hypot(a.clustering - b.clustering, a.path_length - b.path_length);
}

BnnSimilarityReport rank_by_distance(const GraphMeasures& query, std::vector<BnnEntry> candidates) {
    for (auto& c : candidates) c.distance = measure_distance(query, c.measures);
    std::sort(candidates.begin(), candidates.end(), [](const BnnEntry& lhs, const BnnEntry& rhs) {
        if (lhs.distance != rhs.distance) return lhs.distance < rhs.distance;
        return lhs.name < rhs.name;
    });
    return {query, std::move(candidates)};
}

BnnSimilarityReport bnn_distance(const GraphMeasures& query, std::span<const ConnectomeGraph> connectomes) {
    std::vector<BnnEntry> entries;
    entries.reserve(connectomes.size());
    for (const auto& c : connectomes) entries.push_back({c.name, connectome_measures(c), 0.0});
    return rank_by_distance(query, std::move(entries));
}

// ---------------------------------------------------------------------------

namespace {
bool same_architecture(ModelMeta a, ModelMeta b) {
    a.epoch.reset();
    b.epoch.reset();
    return a == b;
}
} // namespace

std::vector<TrainingRow> training_series(std::span<const Checkpoint> checkpoints, const BuildOptions& options) {
    std::vector<TrainingRow> rows;
    if (checkpoints.empty()) return rows;
    const auto& reference = checkpoints.front().model.meta();
    for (const auto& cp : checkpoints) {
        if (!same_architecture(cp.model.meta(), reference)) {
            throw Error(ErrorKind::InconsistentMeta, "checkpoint at epoch " + std::to_string(cp.epoch) +
                                                         " has a different architecture");
        }
    }

    for (const auto& cp : checkpoints) {
        const auto& model = cp.model;
        std::vector<DenseGraph> aggregation;
        std::vector<GraphMeasures> affine;
        std::size_t tokens = 0;
        double tau_aff = 0.0;
        for (int l = 0; l < model.meta().depth; ++l) {
            auto canonical = canonicalize(build_layer_aggregation(model, l, options.head_mode), options.class_token);
            tokens = canonical.graph.n();
            aggregation.push_back(std::move(canonical.graph));

            const auto channels = build_layer_affine(model, l);
            tau_aff = options.tau_affine.value_or(auto_threshold(channels.n()));
            affine.push_back(graph_measures(channels, tau_aff));
        }

        TrainingRow row;
        row.epoch = cp.epoch;
        row.tau_aggregation = options.tau_aggregation.value_or(auto_threshold(tokens));
        row.aggregation = graph_measures(diagonal_concat(aggregation), row.tau_aggregation);
        row.tau_affine = tau_aff;
        row.affine = mean_measures(affine);
        rows.push_back(row);
    }
    return rows;
}

} // namespace relgraph
