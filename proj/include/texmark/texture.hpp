#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmark/image.hpp"

namespace texmark::texture {

struct GaborParams {
    int n_orientations = 9;
    int n_scales = 11;
    /// Highest carrier frequency in cycles/pixel; further scales step down.
    double base_frequency = 0.2;
    double frequency_ratio = 1.4142135623730951;
    /// Half-magnitude frequency bandwidth in octaves.
    double bandwidth = 1.0;
    /// Kernel support radius in envelope standard deviations.
    double truncation = 3.0;

    friend bool operator==(const GaborParams&, const GaborParams&) = default;
};

void to_json(nlohmann::json& j, const GaborParams& p);
void from_json(const nlohmann::json& j, GaborParams& p);

struct GaborKernel {
    int orientation = 0;
    int scale = 0;
    double theta = 0.0;      // carrier direction, radians in [0, pi)
    double frequency = 0.0;  // cycles/pixel
    double sigma = 0.0;      // envelope std-dev, pixels
    int half_width = 0;
    /// (2*half_width+1)^2 complex taps, row-major, centre at (half_width, half_width).
    std::vector<std::complex<double>> taps;

    int size() const { return 2 * half_width + 1; }
    std::complex<double> tap(int dx, int dy) const {
        return taps[static_cast<std::size_t>(dy + half_width) * size() + (dx + half_width)];
    }
};

class GaborBank {
public:
    GaborBank() = default;
    GaborBank(GaborParams params, std::vector<GaborKernel> kernels);

    const GaborParams& params() const { return params_; }
    int n_orientations() const { return params_.n_orientations; }
    int n_scales() const { return params_.n_scales; }
    int dimension() const { return params_.n_orientations * params_.n_scales; }
    double orientation_step() const;
    int max_half_width() const;
    const std::vector<GaborKernel>& kernels() const { return kernels_; }
    const GaborKernel& kernel(int orientation, int scale) const {
        return kernels_[static_cast<std::size_t>(orientation) * params_.n_scales + scale];
    }

private:
    GaborParams params_;
    std::vector<GaborKernel> kernels_;
};

/// Envelope standard deviation giving the requested octave bandwidth.
double gabor_sigma(double frequency, double bandwidth_octaves);

/// Complex Gabor kernels, DC-corrected so every kernel sums to zero, with
/// unit-L1 envelopes so a matched grating of amplitude a responds with ~a/2
/// at every scale. Throws ParameterError on out-of-range parameters.
GaborBank build_gabor_bank(const GaborParams& params);

/// Per-pixel Gabor energy vectors. Index layout is orientation-major:
/// value(pixel, o, s) = values[pixel * dimension + o * n_scales + s].
struct FeatureField {
    int width = 0;
    int height = 0;
    int n_orientations = 0;
    int n_scales = 0;
    /// Input foreground minus the band within max_half_width of the edge.
    std::vector<std::uint8_t> mask;
    std::vector<float> values;

    int dimension() const { return n_orientations * n_scales; }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::span<const float> at(std::size_t pixel) const {
        return {values.data() + pixel * dimension(), static_cast<std::size_t>(dimension())};
    }
};

/// Quadrature-pair magnitude of every kernel response, computed by FFT
/// convolution. Background and border pixels carry zero vectors.
FeatureField apply_bank(const GrayImage& image, const GaborBank& bank);

/// Sum over scales for each orientation.
std::vector<double> directional_energy(std::span<const float> feature, int n_orientations,
                                       int n_scales);

/// Circularly shifts `feature` along the orientation axis so the orientation
/// of maximal directional energy lands at index 0 (lowest index wins ties).
/// Writes into `out` and returns the mode index.
int rotation_align_into(std::span<const float> feature, std::span<float> out, int n_orientations,
                        int n_scales);

struct AlignedFeature {
    std::vector<float> aligned;
    int mode_index = 0;
};

AlignedFeature rotation_align(std::span<const float> feature, int n_orientations, int n_scales);

/// Row-major sample matrix of aligned feature vectors.
struct FeatureSample {
    int dimension = 0;
    std::vector<float> values;

    std::size_t size() const {
        return dimension == 0 ? 0 : values.size() / static_cast<std::size_t>(dimension);
    }
    std::span<const float> row(std::size_t i) const {
        return {values.data() + i * dimension, static_cast<std::size_t>(dimension)};
    }
    void append(const FeatureSample& other);
};

/// Seeded subsample (without replacement) of aligned foreground features.
FeatureSample sample_aligned_features(const FeatureField& field, std::size_t max_samples,
                                      std::uint64_t rng_seed);

struct CodebookOptions {
    int initial_k = 100;
    /// Absolute merge distance; when unset, merge_factor x median pairwise
    /// K-Means centroid distance.
    std::optional<double> merge_threshold;
    double merge_factor = 0.3;
    int max_iterations = 100;
    std::uint64_t rng_seed = 0;
};

struct TextonCodebook {
    int n_orientations = 0;
    int n_scales = 0;
    GaborParams gabor;
    std::vector<std::vector<float>> centroids;
    /// Training points assigned to each texton.
    std::vector<std::int64_t> counts;
    double merge_threshold = 0.0;
    std::uint64_t rng_seed = 0;
    int initial_k = 0;
    /// K-Means objective after each assignment pass.
    std::vector<double> objective_trace;

    int size() const { return static_cast<int>(centroids.size()); }
    int dimension() const { return n_orientations * n_scales; }
};

/// K-Means++ seeded Lloyd iterations to `initial_k` clusters, followed by
/// repeated single-linkage merging of centroids closer than the merge
/// threshold (count-weighted means). Deterministic given the seed.
TextonCodebook learn_codebook(const FeatureSample& sample, int n_orientations, int n_scales,
                              const CodebookOptions& options);

struct TextonMap {
    static constexpr std::int32_t kNoTexton = -1;

    int width = 0;
    int height = 0;
    int n_textons = 0;
    std::vector<std::int32_t> labels;

    std::int32_t at(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
};

/// Nearest centroid (Euclidean, lowest index on ties) in aligned space.
int nearest_texton(std::span<const float> aligned, const TextonCodebook& codebook);

TextonMap assign_textons(const FeatureField& field, const TextonCodebook& codebook);

inline constexpr int kCodebookVersion = 1;

nlohmann::json codebook_to_json(const TextonCodebook& codebook);
/// Throws InputError on schema or version mismatch.
TextonCodebook codebook_from_json(const nlohmann::json& j);

}  // namespace texmark::texture
