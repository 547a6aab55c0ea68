#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmark/image.hpp"

namespace texmark::segmentation {

struct SuperpixelMap {
    static constexpr std::int32_t kBackground = -1;

    int width = 0;
    int height = 0;
    int n_superpixels = 0;
    std::vector<std::int32_t> labels;
    std::vector<PointF> centroids;
    std::vector<std::int64_t> areas;
    std::uint64_t rng_seed = 0;

    std::int32_t at(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
    std::int64_t foreground_area() const;
    /// Diameter of a disk with the mean superpixel area.
    double mean_diameter() const;
};

struct SlicParams {
    int target_count = 256;
    /// Spatial weight m in D^2 = dI^2 + (ds / S)^2 m^2, intensities on [0, 100].
    double compactness = 10.0;
    /// Gaussian pre-smoothing of intensities (pixels); 0 disables.
    double smoothing_sigma = 0.0;
    int iterations = 10;
    /// Connected fragments below this fraction of the target area are absorbed.
    double min_area_fraction = 0.25;
    std::uint64_t rng_seed = 0;
};

/// SLIC over the foreground of `image` with 4-connectivity enforcement.
/// Throws ParameterError for target_count < 1, target_count above the
/// foreground pixel count, or non-positive compactness.
SuperpixelMap slic(const GrayImage& image, const SlicParams& params);

/// Recomputes n_superpixels, centroids and areas from labels.
void recompute_statistics(SuperpixelMap& map);

/// Ordered boundary segment between an interior and an exterior superpixel.
struct Segment {
    int interior = 0;
    int exterior = 0;

    friend auto operator<=>(const Segment&, const Segment&) = default;
};

struct SegmentGeometry {
    std::vector<Pixel> border;
    PointF midpoint;
};

/// Superpixel neighbourhoods under 4-adjacency, with the shared border
/// pixels (pixels on either side touching the other superpixel) per edge.
class AdjacencyGraph {
public:
    AdjacencyGraph() = default;
    explicit AdjacencyGraph(int n_nodes);

    int size() const { return static_cast<int>(neighbors_.size()); }
    const std::vector<int>& neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
    bool adjacent(int i, int j) const;
    std::size_t edge_count() const { return edges_.size(); }

    /// Throws LookupError when (i, j) is not an edge.
    const std::vector<Pixel>& border(int i, int j) const;
    const PointF& midpoint(int i, int j) const;

    void add_border_pixel(int a, int b, Pixel p);
    /// Sorts/deduplicates border lists, computes midpoints and neighbour sets.
    void finalize();

private:
    struct Edge {
        int a = 0;
        int b = 0;
        std::vector<Pixel> border;
        PointF midpoint;
    };
    std::size_t edge_index(int i, int j) const;
    static std::uint64_t key(int i, int j);

    std::vector<std::vector<int>> neighbors_;
    std::vector<Edge> edges_;
    std::vector<std::pair<std::uint64_t, std::size_t>> lookup_;  // sorted by key
};

AdjacencyGraph build_adjacency(const SuperpixelMap& map);

SegmentGeometry segment_geometry(const AdjacencyGraph& graph, int i, int j);

inline constexpr int kSuperpixelSidecarVersion = 1;

nlohmann::json superpixel_sidecar(const SuperpixelMap& map);
/// PNG label image (16-bit) plus JSON sidecar next to it.
void write_superpixel_map(const SuperpixelMap& map, const std::filesystem::path& png_path,
                          const std::filesystem::path& json_path);
SuperpixelMap read_superpixel_map(const std::filesystem::path& png_path,
                                  const std::filesystem::path& json_path);

}  // namespace texmark::segmentation
