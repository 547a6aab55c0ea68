#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmark/boundaries.hpp"
#include "texmark/regions.hpp"
#include "texmark/segmentation.hpp"
#include "texmark/stats.hpp"

namespace texmark::matching {

using segmentation::Segment;
using stats::TextonHistogram;

enum class LandmarkKind { Closed, Open };

std::string to_string(LandmarkKind kind);
LandmarkKind landmark_kind_from_string(const std::string& s);

struct Landmark {
    int id = 0;
    LandmarkKind kind = LandmarkKind::Closed;
    int rank = 0;  // within its kind
    double score = 0.0;
    /// Segments in polyline order, with their midpoints and exterior histograms.
    std::vector<Segment> segments;
    std::vector<PointF> midpoints;
    std::vector<TextonHistogram> exterior;
    TextonHistogram interior;
    PointF centroid;
    /// Closed: region superpixels. Open: supporter seeds Q_B.
    std::vector<int> members;
};

PointF mean_point(std::span<const PointF> points);

/// Closed landmark from a region proposal: its boundary segments chained into a loop.
Landmark closed_landmark(const regions::RegionProposal& proposal, const segmentation::AdjacencyGraph& graph,
                         std::span<const TextonHistogram> hists);
/// Open landmark from a boundary group; interior histogram is h over Q_B.
Landmark open_landmark(const boundaries::BoundaryGroup& group, std::span<const TextonHistogram> hists);

/// Closed landmarks keep their order; an open landmark is dropped when the
/// Jaccard similarity of its segment set with some closed landmark's exceeds
/// `coincide_threshold`. Ids are reassigned 0..n-1 (closed first); ranks
/// are renumbered within each kind.
std::vector<Landmark> unify_landmarks(std::vector<Landmark> closed, std::vector<Landmark> open,
                                      double coincide_threshold);

struct ShapeContextParams {
    int n_r = 5;
    int n_theta = 12;
    double r_inner = 0.125;
    double r_outer = 2.0;
    /// Measure angles relative to the mean tangent direction of the polyline.
    bool tangent_normalize = false;

    friend bool operator==(const ShapeContextParams&, const ShapeContextParams&) = default;
};

/// Per point, log-polar counts (n_r x n_theta, radius-major) of the other
/// points. Radii are divided by the mean pairwise distance; radii outside
/// [r_inner, r_outer] fall into the first/last ring. Throws ParameterError
/// for fewer than two points.
std::vector<std::vector<std::int64_t>> shape_context(std::span<const PointF> points,
                                                     const ShapeContextParams& params = {});

struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // sorted by row
    double cost = 0.0;
};

/// Minimum-cost assignment of min(n, m) pairs on a row-major n x m matrix.
/// Among optimal assignments the one whose column sequence over rows is
/// lexicographically smallest is returned (an unassigned row counts as
/// larger than any column). Throws ParameterError for an empty or
/// non-finite matrix.
Assignment hungarian(std::span<const double> cost, int n, int m);

struct MatchWeights {
    double w_int = 1.0;
    double w_shape = 1.0;
    double w_ext = 0.5;
    double w_loc = 0.01;  // per pixel
    double tolerance_px = 500.0;
    /// Divide D_ext by |M| instead of summing.
    bool normalized_exterior = false;
    int max_points = 60;
    ShapeContextParams shape;

    friend bool operator==(const MatchWeights&, const MatchWeights&) = default;
};

void to_json(nlohmann::json& j, const MatchWeights& w);
void from_json(const nlohmann::json& j, MatchWeights& w);

/// Indices of at most `max_points` entries spread uniformly along 0..n-1.
std::vector<std::size_t> subsample_indices(std::size_t n, int max_points);

double d_interior(const Landmark& a, const Landmark& b);

struct ShapeDistance {
    double cost = 0.0;
    /// Pairs of indices into each landmark's full midpoint list.
    std::vector<std::pair<int, int>> correspondence;
};

ShapeDistance d_shape(const Landmark& a, const Landmark& b, const MatchWeights& w = {});
double d_exterior(const Landmark& a, const Landmark& b, std::span<const std::pair<int, int>> correspondence,
                  bool normalized = false);
double d_location(const Landmark& a, const Landmark& b, double tolerance_px);

struct LandmarkMatch {
    int a = 0;
    int b = 0;
    double d_int = 0.0;
    double d_shape = 0.0;
    double d_ext = 0.0;
    double d_loc = 0.0;
    double total = 0.0;
    std::vector<std::pair<int, int>> correspondence;
};

/// w_int*D_int + w_shape*D_shape + w_ext*D_ext + w_loc*D_loc, summed in that order.
double weighted_total(const LandmarkMatch& m, const MatchWeights& w);

LandmarkMatch landmark_distance(const Landmark& a, const Landmark& b, const MatchWeights& w);

/// Full |A| x |B| distance table, row-major.
std::vector<LandmarkMatch> distance_table(std::span<const Landmark> a, std::span<const Landmark> b,
                                          const MatchWeights& w);

/// Pairs that are each other's argmin (lowest index on ties), ordered by a.
/// The ids in the result are list indices.
std::vector<LandmarkMatch> mutual_nearest(std::span<const LandmarkMatch> table, int n_a, int n_b);

std::vector<LandmarkMatch> mutual_nearest_match(std::span<const Landmark> a, std::span<const Landmark> b,
                                                const MatchWeights& w);

nlohmann::json landmark_to_json(const Landmark& l);
Landmark landmark_from_json(const nlohmann::json& j);

inline constexpr int kMatchReportVersion = 1;

nlohmann::json match_report(std::span<const LandmarkMatch> matches, const MatchWeights& w);

}  // namespace texmark::matching
