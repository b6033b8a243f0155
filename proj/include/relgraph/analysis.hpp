#pragma once

#include "relgraph/builders.hpp"
#include "relgraph/graph_core.hpp"
#include "relgraph/model_io.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relgraph {

// Reference values reported for pretrained ViTs. Documentation only; no
// computation here depends on them.
inline constexpr std::pair<double, double> kReferenceClusteringSweetSpot{0.839, 0.842};
inline constexpr std::pair<double, double> kReferencePathLengthSweetSpot{1.256, 1.307};
inline constexpr double kReferenceAffineThreshold = 1.0 / 192.0;
inline constexpr double kReferenceAggregationThreshold = 1.0 / 197.0;

struct MeasurePoint {
    std::string model_id;
    std::string dataset;
    double measure_c = 0.0;
    double measure_l = 0.0;
    double accuracy = 0.0;
    std::optional<double> params_millions;
};

struct XY {
    double x = 0.0;
    double y = 0.0;
};

enum class Curvature { Min, Max, Degenerate };

std::string_view to_string(Curvature curvature);

/// y = a x^2 + b x + c
struct QuadraticFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    // NaN when degenerate.
    double extremum_x = 0.0;
    double r_squared = 0.0;
    Curvature curvature = Curvature::Degenerate;
    std::size_t points = 0;

    double operator()(double x) const { return (a * x + b) * x + c; }
};

/// Ordinary least squares on [1, x, x^2]. The normal equations are formed on
/// x standardized to zero mean and unit variance; coefficients are mapped back.
QuadraticFit fit_quadratic(std::span<const XY> points);

enum class MeasureName { Clustering, PathLength };

std::string_view to_string(MeasureName name);

struct SweetSpot {
    MeasureName measure = MeasureName::Clustering;
    double low = 0.0;
    double high = 0.0;
    std::vector<std::string> datasets_used;
};

/// Span of the per-dataset extrema. When `orientation` is given every fit
/// must have that curvature.
SweetSpot sweet_spot(std::span<const QuadraticFit> fits, MeasureName measure, std::vector<std::string> datasets = {},
                     std::optional<Curvature> orientation = std::nullopt);

struct Correlation {
    double pearson_r = 0.0;
    double t_statistic = 0.0;
};

Correlation linear_correlation(std::span<const XY> points);

// --- biological network similarity ------------------------------------------

/// Presence/absence graph of the connectome, undirected.
BinaryGraph connectome_binary(const ConnectomeGraph& connectome);
GraphMeasures connectome_measures(const ConnectomeGraph& connectome);

struct BnnEntry {
    std::string name;
    GraphMeasures measures;
    double distance = 0.0;
};

struct BnnSimilarityReport {
    GraphMeasures query;
    std::vector<BnnEntry> ranked;
};

double measure_distance(const GraphMeasures& a, const GraphMeasures& b);

/// Ascending Euclidean distance in the (C, L) plane; ties broken by name.
BnnSimilarityReport rank_by_distance(const GraphMeasures& query, std::vector<BnnEntry> candidates);
BnnSimilarityReport bnn_distance(const GraphMeasures& query, std::span<const ConnectomeGraph> connectomes);

// --- training trajectories ----------------------------------------------------

struct Checkpoint {
    int epoch = 0;
    ValidatedModel model;
};

struct TrainingRow {
    int epoch = 0;
    double tau_aggregation = 0.0;
    GraphMeasures aggregation;
    double tau_affine = 0.0;
    GraphMeasures affine;
};

/// Per checkpoint: canonical layer aggregation graphs joined along the
/// diagonal and measured once; affine measures averaged over layers.
/// Rows come back in input order.
std::vector<TrainingRow> training_series(std::span<const Checkpoint> checkpoints, const BuildOptions& options = {});

} // namespace relgraph
