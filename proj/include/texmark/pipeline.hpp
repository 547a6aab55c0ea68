#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmark/boundaries.hpp"
#include "texmark/matching.hpp"
#include "texmark/regions.hpp"
#include "texmark/segmentation.hpp"
#include "texmark/stats.hpp"
#include "texmark/texture.hpp"

namespace texmark::pipeline {

struct PipelineConfig {
    texture::GaborParams gabor;
    std::size_t samples_per_image = 100000;
    int initial_k = 100;
    std::optional<double> merge_threshold;
    double merge_factor = 0.3;
    int kmeans_iterations = 100;

    double superpixel_area = 3000.0;  // target pixels per superpixel
    double compactness = 10.0;
    double smoothing_sigma = 0.0;
    int slic_iterations = 10;
    double min_area_fraction = 0.25;

    regions::SignificanceWeights significance;
    double max_area_fraction = 0.10;
    double proposal_cut = 0.4;
    int min_cluster_size = 5;

    double vote_percentile = 0.75;
    double segment_cut = 0.4;
    double coincide_threshold = 0.5;

    int top_closed = 20;
    int top_open = 10;

    matching::MatchWeights match;
    double tolerance_mm = 1.0;
    double microns_per_pixel = 2.0;

    std::uint64_t rng_seed = 0;

    double tolerance_px() const { return tolerance_mm * 1000.0 / microns_per_pixel; }
    /// Match weights with the location tolerance derived from the scale.
    matching::MatchWeights match_weights() const;
};

nlohmann::json config_to_json(const PipelineConfig& c);
/// Missing keys take defaults; unknown keys and out-of-range values throw ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
void validate(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);
std::string config_hash(const PipelineConfig& c);
std::string codebook_hash(const texture::TextonCodebook& cb);

/// Pooled seeded feature samples from every image, then one codebook.
texture::TextonCodebook build_codebook(const std::vector<GrayImage>& images, const PipelineConfig& config);
texture::TextonCodebook build_codebook(const std::vector<std::filesystem::path>& paths, const PipelineConfig& config);

texture::TextonCodebook load_codebook(const std::filesystem::path& path);
void save_codebook(const texture::TextonCodebook& cb, const std::filesystem::path& path);

inline constexpr int kSectionResultVersion = 1;

struct SectionResult {
    std::string section;
    int width = 0;
    int height = 0;
    int n_superpixels = 0;
    double superpixel_diameter = 0.0;
    nlohmann::json config;
    std::string config_hash;
    std::string codebook_hash;
    std::string image_hash;
    /// Closed landmarks first, then open, ids equal to positions.
    std::vector<matching::Landmark> landmarks;

    std::vector<const matching::Landmark*> of_kind(matching::LandmarkKind kind) const;
};

nlohmann::json result_to_json(const SectionResult& r);
/// Throws InputError on malformed or version-mismatched documents.
SectionResult result_from_json(const nlohmann::json& j);
SectionResult load_result(const std::filesystem::path& path);
void save_json(const nlohmann::json& j, const std::filesystem::path& path);

/// Everything computed for one section.
struct Detection {
    SectionResult result;
    texture::TextonMap textons;
    segmentation::SuperpixelMap superpixels;
    segmentation::AdjacencyGraph graph;
    std::vector<stats::TextonHistogram> histograms;
    std::vector<regions::RegionProposal> proposals;
    std::vector<boundaries::SegmentVote> votes;
    std::vector<boundaries::SegmentVote> surviving;
    std::vector<boundaries::BoundaryGroup> groups;
};

Detection detect_image(const GrayImage& image, const texture::TextonCodebook& codebook, const PipelineConfig& config,
                       const std::string& section = "section");

struct DetectOptions {
    std::optional<std::filesystem::path> cache_dir;
};

struct DetectOutcome {
    SectionResult result;
    bool cache_hit = false;
};

/// Reads the image, then serves the result from the cache when a valid
/// entry exists for (image content, config, codebook); a corrupt entry is
/// rebuilt with a warning on stderr.
DetectOutcome detect(const std::filesystem::path& image_path, const texture::TextonCodebook& codebook,
                     const PipelineConfig& config, const DetectOptions& options = {});

/// Mutual-nearest matching between two sections; `no_location` zeroes w_loc.
/// Throws CompatibilityError when the codebook hashes differ.
nlohmann::json match_sections(const SectionResult& a, const SectionResult& b, matching::MatchWeights weights,
                              bool no_location, std::vector<matching::LandmarkMatch>* matches = nullptr);

/// Outline of every landmark, coloured and numbered by rank (1-based) per kind.
void render_result_overlay(const GrayImage& image, const SectionResult& result, const std::filesystem::path& out);
/// Matched landmarks share colour and number across the two images.
void render_match_overlay(const GrayImage& image_a, const GrayImage& image_b, const nlohmann::json& report,
                          const std::filesystem::path& out_a, const std::filesystem::path& out_b);

}  // namespace texmark::pipeline
