#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmark/boundaries.hpp"
#include "texmark/image.hpp"
#include "texmark/matching.hpp"
#include "texmark/segmentation.hpp"

namespace texmark::synthbench {

enum class TextureKind { Grating, Plaid, Dots, Noise };
enum class ShapeKind { Ellipse, Blob, HalfOpen };

struct TextureSpec {
    TextureKind kind = TextureKind::Noise;
    double mean = 0.5;
    double contrast = 0.4;
    double frequency = 0.1;        // cycles/pixel (grating, plaid)
    double orientation_deg = 0.0;  // grating direction, lattice rotation
    double spacing = 12.0;         // dot lattice pitch
    double radius = 2.5;           // dot radius
    double noise = 0.02;           // per-pixel Gaussian noise
};

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Ellipse;
    int texture = 0;
    PointF center;
    double rx = 50.0;
    double ry = 50.0;
    double angle_deg = 0.0;
    /// Blob: radial harmonic amplitudes (k = 2, 3, ...) and phases.
    std::vector<double> harmonics;
    std::vector<double> phases;
    /// Half-open: direction (from the centre) of the sharp semicircular side
    /// and the width of the alpha falloff on the other side.
    double sharp_direction_deg = 0.0;
    double falloff = 60.0;
};

struct SceneSpec {
    int width = 512;
    int height = 512;
    int background_texture = 0;
    std::vector<TextureSpec> textures;
    std::vector<ShapeSpec> shapes;
    std::uint64_t rng_seed = 0;
};

struct DistortionSpec {
    double rotation_deg = 0.0;
    PointF translation;
    double jitter_amplitude = 0.0;  // max displacement, pixels
    double jitter_scale = 128.0;    // wavelength, pixels
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;
};

void to_json(nlohmann::json& j, const TextureSpec& t);
void from_json(const nlohmann::json& j, TextureSpec& t);
void to_json(nlohmann::json& j, const ShapeSpec& s);
void from_json(const nlohmann::json& j, ShapeSpec& s);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
void to_json(nlohmann::json& j, const DistortionSpec& d);
void from_json(const nlohmann::json& j, DistortionSpec& d);

struct Scene {
    GrayImage image;
    /// 0 = background, k + 1 = shape k.
    std::vector<std::int32_t> labels;
    std::vector<ShapeKind> kinds;
    /// Per shape: the sharp edge polyline (half-open shapes only, else empty).
    std::vector<std::vector<PointF>> open_edges;

    int n_structures() const { return static_cast<int>(kinds.size()); }
};

/// Deterministic given the spec. Throws SpecError for overlapping shapes,
/// shapes leaving the canvas, or bad texture references.
Scene render_scene(const SceneSpec& spec);

/// Displacement added to the source lookup position of output pixel (x, y).
/// Its magnitude never exceeds d.jitter_amplitude.
PointF elastic_displacement(const DistortionSpec& d, double x, double y);

struct Distorted {
    GrayImage image;
    std::vector<std::int32_t> labels;
};

/// Rotation about the canvas centre, translation, and sinusoidal jitter,
/// applied identically to image (bilinear, reflected border) and labels
/// (nearest, background outside), then Gaussian intensity noise.
Distorted distort(const GrayImage& image, std::span<const std::int32_t> labels, const DistortionSpec& d);

/// Seeded scene: `n_compact` ellipses/blobs plus one half-open region, each
/// with its own texture.
SceneSpec random_scene(std::uint64_t seed, int width, int height, int n_compact = 5);

struct DistortionLimits {
    double max_rotation_deg = 15.0;
    double max_translation = 300.0;
    double max_jitter = 8.0;
    double max_noise = 0.05;
};

/// Seeded distortion within `limits`; translation is further restricted so
/// every labelled pixel stays inside the canvas after rotation.
DistortionSpec random_distortion(std::uint64_t seed, const Scene& scene, const DistortionLimits& limits = {});

/// Per-pixel membership mask (0/1) of a closed landmark's superpixels.
std::vector<std::uint8_t> landmark_mask(const matching::Landmark& l, const segmentation::SuperpixelMap& spmap);

struct DetectionScore {
    int n_planted = 0;
    int n_recovered = 0;
    int n_detected = 0;
    int n_true_detections = 0;
    double recall = 0.0;
    double precision = 0.0;
    std::vector<double> best_iou;  // per planted region
};

/// A planted region (label k + 1 for every k in `planted`) is recovered when
/// some detected mask reaches IoU >= threshold with it. Precision counts
/// detected masks reaching the threshold with some planted region.
DetectionScore score_detection(std::span<const std::vector<std::uint8_t>> detected,
                               std::span<const std::int32_t> labels, std::span<const int> planted,
                               double iou_threshold = 0.7);

double point_to_polyline(PointF p, std::span<const PointF> polyline);
/// Fraction of `points` within `tolerance` of the polyline.
double fraction_within(std::span<const PointF> points, std::span<const PointF> polyline, double tolerance);
double mean_distance(std::span<const PointF> points, std::span<const PointF> polyline);

/// Which planted structures a landmark stands for.
struct LandmarkTruth {
    int primary = -1;           // structure index, -1 for none
    std::vector<int> touched;   // structure indices, ascending
};

/// Closed: the structure holding the largest share of the landmark's pixels
/// when that share is >= 0.5; touched = structures holding >= 10%.
/// Open: majority structure over both sides of its segments (per-superpixel
/// majority labels, background ignored); touched = all structures seen.
LandmarkTruth landmark_truth(const matching::Landmark& l, const segmentation::SuperpixelMap& spmap,
                             std::span<const std::int32_t> labels);

/// Open-landmark truth rule applied to a boundary group's segments.
LandmarkTruth group_truth(const boundaries::BoundaryGroup& g, const segmentation::SuperpixelMap& spmap,
                          std::span<const std::int32_t> labels);

/// Per-superpixel majority truth label (ties to the lowest label).
std::vector<std::int32_t> superpixel_majority(const segmentation::SuperpixelMap& spmap,
                                              std::span<const std::int32_t> labels);

struct MatchScore {
    int n_matches = 0;
    int correct = 0;
    int partial = 0;
    int wrong = 0;
    int n_structures = 0;
    int structures_matched = 0;
    bool no_matches = false;

    double fraction_correct() const { return n_matches ? static_cast<double>(correct) / n_matches : 0.0; }
    double fraction_partial() const { return n_matches ? static_cast<double>(partial) / n_matches : 0.0; }
    double fraction_wrong() const { return n_matches ? static_cast<double>(wrong) / n_matches : 0.0; }
    double fraction_structures() const {
        return n_structures ? static_cast<double>(structures_matched) / n_structures : 0.0;
    }
};

/// Correspondence is label identity: structure k in A is structure k in B.
/// Correct: equal primaries. Partial: touched sets intersect. Else wrong.
/// `truth_a` / `truth_b` are indexed by landmark id.
MatchScore score_matching(std::span<const matching::LandmarkMatch> matches, std::span<const LandmarkTruth> truth_a,
                          std::span<const LandmarkTruth> truth_b, int n_structures);

}  // namespace texmark::synthbench
