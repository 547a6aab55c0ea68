#include "texmark/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "texmark/error.hpp"

namespace texmark::segmentation {

std::int64_t SuperpixelMap::foreground_area() const {
    return std::accumulate(areas.begin(), areas.end(), std::int64_t{0});
}

double SuperpixelMap::mean_diameter() const {
    if (n_superpixels == 0) return 0.0;
    const double mean_area = static_cast<double>(foreground_area()) / n_superpixels;
    return 2.0 * std::sqrt(mean_area / std::numbers::pi);
}

void recompute_statistics(SuperpixelMap& map) {
    std::int32_t max_label = -1;
    for (auto l : map.labels) max_label = std::max(max_label, l);
    map.n_superpixels = max_label + 1;
    map.areas.assign(static_cast<std::size_t>(map.n_superpixels), 0);
    std::vector<double> sx(map.areas.size(), 0.0), sy(map.areas.size(), 0.0);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const auto l = map.at(x, y);
            if (l < 0) continue;
            ++map.areas[l];
            sx[l] += x;
            sy[l] += y;
        }
    }
    map.centroids.assign(map.areas.size(), PointF{});
    for (std::size_t i = 0; i < map.areas.size(); ++i) {
        if (map.areas[i] == 0) continue;
        map.centroids[i] = {sx[i] / map.areas[i], sy[i] / map.areas[i]};
    }
}

namespace {

struct Center {
    double x = 0.0;
    double y = 0.0;
    double l = 0.0;
};

// 4-connected components of equal raw labels over the foreground.
std::vector<std::int32_t> connected_components(const std::vector<std::int32_t>& raw,
                                               const std::vector<std::uint8_t>& mask, int w, int h,
                                               int& n_components) {
    std::vector<std::int32_t> comp(raw.size(), -1);
    std::vector<std::size_t> stack;
    n_components = 0;
    for (std::size_t start = 0; start < raw.size(); ++start) {
        if (mask[start] == 0 || comp[start] >= 0) continue;
        const std::int32_t id = n_components++;
        comp[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(p % w);
            const int y = static_cast<int>(p / w);
            const std::size_t nbrs[4] = {p - 1, p + 1, p - w, p + w};
            const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
            for (int k = 0; k < 4; ++k) {
                if (!ok[k]) continue;
                const std::size_t q = nbrs[k];
                if (mask[q] == 0 || comp[q] >= 0 || raw[q] != raw[p]) continue;
                comp[q] = id;
                stack.push_back(q);
            }
        }
    }
    return comp;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

SuperpixelMap slic(const GrayImage& image, const SlicParams& params) {
    image.validate();
    if (params.target_count < 1) throw ParameterError("target_count must be >= 1");
    if (!(params.compactness > 0.0)) throw ParameterError("compactness must be positive");
    const int w = image.width;
    const int h = image.height;
    const auto n_fg = static_cast<std::int64_t>(image.foreground_count());
    if (params.target_count > n_fg) {
        throw ParameterError("target_count exceeds the foreground pixel count");
    }

    std::vector<float> lum(image.intensities.size());
    {
        cv::Mat src(h, w, CV_32F, const_cast<float*>(image.intensities.data()));
        cv::Mat dst(h, w, CV_32F, lum.data());
        if (params.smoothing_sigma > 0.0) {
            cv::GaussianBlur(src, dst, cv::Size(0, 0), params.smoothing_sigma, params.smoothing_sigma,
                             cv::BORDER_REFLECT);
        } else {
            src.copyTo(dst);
        }
        for (float& v : lum) v *= 100.0f;
    }
    const auto& mask = image.foreground;
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

    int x0 = w, x1 = -1, y0 = h, y1 = -1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask[idx(x, y)] == 0) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    const double bw = x1 - x0 + 1;
    const double bh = y1 - y0 + 1;
    const double step = std::sqrt(static_cast<double>(n_fg) / params.target_count);
    const int nx = std::clamp(static_cast<int>(std::lround(std::sqrt(params.target_count * bw / bh))), 1,
                              params.target_count);
    const int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(params.target_count) / nx)));
    const double sx = bw / nx;
    const double sy = bh / ny;

    auto gradient = [&](int x, int y) {
        if (x <= 0 || y <= 0 || x >= w - 1 || y >= h - 1) return std::numeric_limits<double>::infinity();
        const double gx = lum[idx(x + 1, y)] - lum[idx(x - 1, y)];
        const double gy = lum[idx(x, y + 1)] - lum[idx(x, y - 1)];
        return gx * gx + gy * gy;
    };

    std::vector<Center> centers;
    for (int gy = 0; gy < ny; ++gy) {
        for (int gx = 0; gx < nx; ++gx) {
            const int cx = std::min(x1, x0 + static_cast<int>((gx + 0.5) * sx));
            const int cy = std::min(y1, y0 + static_cast<int>((gy + 0.5) * sy));
            int px = -1, py = -1;
            if (mask[idx(cx, cy)] != 0) {
                px = cx;
                py = cy;
            } else {
                // Nearest foreground pixel inside this grid cell.
                const int cx0 = x0 + static_cast<int>(gx * sx), cx1 = std::min(x1, x0 + static_cast<int>((gx + 1) * sx));
                const int cy0 = y0 + static_cast<int>(gy * sy), cy1 = std::min(y1, y0 + static_cast<int>((gy + 1) * sy));
                long best = std::numeric_limits<long>::max();
                for (int y = cy0; y <= cy1; ++y) {
                    for (int x = cx0; x <= cx1; ++x) {
                        if (mask[idx(x, y)] == 0) continue;
                        const long d = static_cast<long>(x - cx) * (x - cx) + static_cast<long>(y - cy) * (y - cy);
                        if (d < best) {
                            best = d;
                            px = x;
                            py = y;
                        }
                    }
                }
            }
            if (px < 0) continue;
            // Move to the lowest-gradient foreground pixel in the 3x3 neighbourhood.
            int bx = px, by = py;
            double bg = gradient(px, py);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = px + dx, y = py + dy;
                    if (x < 0 || y < 0 || x >= w || y >= h || mask[idx(x, y)] == 0) continue;
                    const double g = gradient(x, y);
                    if (g < bg) {
                        bg = g;
                        bx = x;
                        by = y;
                    }
                }
            }
            centers.push_back({static_cast<double>(bx), static_cast<double>(by), lum[idx(bx, by)]});
        }
    }

    const std::size_t n = image.pixel_count();
    std::vector<std::int32_t> raw(n, -1);
    std::vector<double> dist(n);
    const int window = static_cast<int>(std::ceil(std::max(sx, sy)));
    const double spatial = (params.compactness * params.compactness) / (step * step);
    for (int iter = 0; iter < params.iterations; ++iter) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const Center& ct = centers[c];
            const int cx = static_cast<int>(std::lround(ct.x));
            const int cy = static_cast<int>(std::lround(ct.y));
            const int ya = std::max(0, cy - window), yb = std::min(h - 1, cy + window);
            const int xa = std::max(0, cx - window), xb = std::min(w - 1, cx + window);
            for (int y = ya; y <= yb; ++y) {
                for (int x = xa; x <= xb; ++x) {
                    const std::size_t p = idx(x, y);
                    if (mask[p] == 0) continue;
                    const double dl = lum[p] - ct.l;
                    const double dx = x - ct.x, dy = y - ct.y;
                    const double d = dl * dl + (dx * dx + dy * dy) * spatial;
                    if (d < dist[p]) {
                        dist[p] = d;
                        raw[p] = static_cast<std::int32_t>(c);
                    }
                }
            }
        }
        std::vector<Center> sums(centers.size());
        std::vector<std::int64_t> counts(centers.size(), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = idx(x, y);
                if (raw[p] < 0) continue;
                auto& s = sums[static_cast<std::size_t>(raw[p])];
                s.x += x;
                s.y += y;
                s.l += lum[p];
                ++counts[static_cast<std::size_t>(raw[p])];
            }
        }
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (counts[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[c]);
            centers[c] = {sums[c].x * inv, sums[c].y * inv, sums[c].l * inv};
        }
    }

    // Connectivity: split into 4-connected fragments, then absorb small
    // fragments into their largest adjacent fragment.
    int n_comp = 0;
    const std::vector<std::int32_t> comp = connected_components(raw, mask, w, h, n_comp);
    std::vector<std::int64_t> area(static_cast<std::size_t>(n_comp), 0);
    for (std::size_t p = 0; p < n; ++p) {
        if (comp[p] >= 0) ++area[static_cast<std::size_t>(comp[p])];
    }
    std::vector<std::vector<std::int32_t>> adjacent(static_cast<std::size_t>(n_comp));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t a = comp[idx(x, y)];
            if (a < 0) continue;
            if (x + 1 < w) {
                const std::int32_t b = comp[idx(x + 1, y)];
                if (b >= 0 && b != a) {
                    adjacent[a].push_back(b);
                    adjacent[b].push_back(a);
                }
            }
            if (y + 1 < h) {
                const std::int32_t b = comp[idx(x, y + 1)];
                if (b >= 0 && b != a) {
                    adjacent[a].push_back(b);
                    adjacent[b].push_back(a);
                }
            }
        }
    }
    for (auto& v : adjacent) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    const double min_area = params.min_area_fraction * static_cast<double>(n_fg) / params.target_count;
    std::vector<std::size_t> parent(static_cast<std::size_t>(n_comp));
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<std::int64_t> merged_area = area;
    for (std::size_t c = 0; c < static_cast<std::size_t>(n_comp); ++c) {
        const std::size_t rc = find_root(parent, c);
        if (rc != c || static_cast<double>(merged_area[rc]) >= min_area) continue;
        std::size_t best = SIZE_MAX;
        for (const std::int32_t nb : adjacent[c]) {
            const std::size_t r = find_root(parent, static_cast<std::size_t>(nb));
            if (r == rc) continue;
            if (best == SIZE_MAX || merged_area[r] > merged_area[best] ||
                (merged_area[r] == merged_area[best] && r < best)) {
                best = r;
            }
        }
        if (best == SIZE_MAX) continue;
        parent[rc] = best;
        merged_area[best] += merged_area[rc];
        // Inherit the absorbed fragment's neighbours so later lookups see them.
        adjacent[best].insert(adjacent[best].end(), adjacent[c].begin(), adjacent[c].end());
    }

    SuperpixelMap out;
    out.width = w;
    out.height = h;
    out.rng_seed = params.rng_seed;
    out.labels.assign(n, SuperpixelMap::kBackground);
    std::vector<std::int32_t> final_id(static_cast<std::size_t>(n_comp), -1);
    std::int32_t next = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (comp[p] < 0) continue;
        const std::size_t r = find_root(parent, static_cast<std::size_t>(comp[p]));
        if (final_id[r] < 0) final_id[r] = next++;
        out.labels[p] = final_id[r];
    }
    recompute_statistics(out);
    return out;
}

AdjacencyGraph::AdjacencyGraph(int n_nodes) : neighbors_(static_cast<std::size_t>(n_nodes)) {}

std::uint64_t AdjacencyGraph::key(int i, int j) {
    const auto a = static_cast<std::uint32_t>(std::min(i, j));
    const auto b = static_cast<std::uint32_t>(std::max(i, j));
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

void AdjacencyGraph::add_border_pixel(int a, int b, Pixel p) {
    const std::uint64_t k = key(a, b);
    auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::size_t{0}),
                               [](const auto& l, const auto& r) { return l.first < r.first; });
    std::size_t e;
    if (it != lookup_.end() && it->first == k) {
        e = it->second;
    } else {
        e = edges_.size();
        edges_.push_back({std::min(a, b), std::max(a, b), {}, {}});
        lookup_.insert(it, {k, e});
    }
    edges_[e].border.push_back(p);
}

void AdjacencyGraph::finalize() {
    for (auto& nb : neighbors_) nb.clear();
    for (auto& e : edges_) {
        std::sort(e.border.begin(), e.border.end());
        e.border.erase(std::unique(e.border.begin(), e.border.end()), e.border.end());
        double sx = 0.0, sy = 0.0;
        for (const Pixel& p : e.border) {
            sx += p.x;
            sy += p.y;
        }
        const auto cnt = static_cast<double>(e.border.size());
        e.midpoint = {sx / cnt, sy / cnt};
        neighbors_[e.a].push_back(e.b);
        neighbors_[e.b].push_back(e.a);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

std::size_t AdjacencyGraph::edge_index(int i, int j) const {
    const std::uint64_t k = key(i, j);
    auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::size_t{0}),
                               [](const auto& l, const auto& r) { return l.first < r.first; });
    if (i == j || it == lookup_.end() || it->first != k) {
        throw LookupError("superpixels " + std::to_string(i) + " and " + std::to_string(j) +
                          " are not adjacent");
    }
    return it->second;
}

bool AdjacencyGraph::adjacent(int i, int j) const {
    if (i < 0 || i >= size()) return false;
    const auto& nb = neighbors_[static_cast<std::size_t>(i)];
    return std::binary_search(nb.begin(), nb.end(), j);
}

const std::vector<Pixel>& AdjacencyGraph::border(int i, int j) const {
    return edges_[edge_index(i, j)].border;
}

const PointF& AdjacencyGraph::midpoint(int i, int j) const {
    return edges_[edge_index(i, j)].midpoint;
}

AdjacencyGraph build_adjacency(const SuperpixelMap& map) {
    AdjacencyGraph graph(map.n_superpixels);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const auto a = map.at(x, y);
            if (a < 0) continue;
            if (x + 1 < map.width) {
                const auto b = map.at(x + 1, y);
                if (b >= 0 && b != a) {
                    graph.add_border_pixel(a, b, {x, y});
                    graph.add_border_pixel(a, b, {x + 1, y});
                }
            }
            if (y + 1 < map.height) {
                const auto b = map.at(x, y + 1);
                if (b >= 0 && b != a) {
                    graph.add_border_pixel(a, b, {x, y});
                    graph.add_border_pixel(a, b, {x, y + 1});
                }
            }
        }
    }
    graph.finalize();
    return graph;
}

SegmentGeometry segment_geometry(const AdjacencyGraph& graph, int i, int j) {
    return {graph.border(i, j), graph.midpoint(i, j)};
}

nlohmann::json superpixel_sidecar(const SuperpixelMap& map) {
    nlohmann::json centroids = nlohmann::json::array();
    for (const auto& c : map.centroids) centroids.push_back({c.x, c.y});
    return {{"version", kSuperpixelSidecarVersion},
            {"width", map.width},
            {"height", map.height},
            {"n_superpixels", map.n_superpixels},
            {"centroids", centroids},
            {"areas", map.areas},
            {"rng_seed", map.rng_seed}};
}

void write_superpixel_map(const SuperpixelMap& map, const std::filesystem::path& png_path,
                          const std::filesystem::path& json_path) {
    write_label_png16(png_path, map.width, map.height, map.labels);
    std::ofstream out(json_path);
    if (!out) throw InputError("cannot write " + json_path.string());
    out << superpixel_sidecar(map).dump(2) << '\n';
}

SuperpixelMap read_superpixel_map(const std::filesystem::path& png_path,
                                  const std::filesystem::path& json_path) {
    SuperpixelMap map;
    map.labels = read_label_png16(png_path, map.width, map.height);
    std::ifstream in(json_path);
    if (!in) throw InputError("cannot read " + json_path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("version").get<int>() != kSuperpixelSidecarVersion) {
            throw InputError("unsupported superpixel sidecar version");
        }
        map.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        recompute_statistics(map);
        if (map.n_superpixels != j.at("n_superpixels").get<int>()) {
            throw InputError("superpixel sidecar disagrees with label image");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed superpixel sidecar: ") + e.what());
    }
    return map;
}

}  // namespace texmark::segmentation
