#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <queue>
#include <random>

#include "helpers.hpp"
#include "texmark/error.hpp"
#include "texmark/segmentation.hpp"

using namespace texmark;
using namespace texmark::segmentation;

namespace {

bool all_connected(const SuperpixelMap& m) {
    std::vector<char> seen(m.labels.size(), 0);
    std::vector<int> components(static_cast<std::size_t>(m.n_superpixels), 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const auto i = static_cast<std::size_t>(y) * m.width + x;
            const int lab = m.labels[i];
            if (lab < 0 || seen[i]) continue;
            ++components[static_cast<std::size_t>(lab)];
            std::queue<std::pair<int, int>> q;
            q.push({x, y});
            seen[i] = 1;
            while (!q.empty()) {
                const auto [cx, cy] = q.front();
                q.pop();
                const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int nx = cx + dx[d], ny = cy + dy[d];
                    if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
                    const auto j = static_cast<std::size_t>(ny) * m.width + nx;
                    if (!seen[j] && m.labels[j] == lab) {
                        seen[j] = 1;
                        q.push({nx, ny});
                    }
                }
            }
        }
    }
    return std::all_of(components.begin(), components.end(), [](int c) { return c == 1; });
}

GrayImage noisy(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.05);
    return testutil::image_from(w, h, [&](int x, int y) {
        return std::clamp(0.3 + 0.4 * ((x / 40 + y / 40) % 2) + n(rng), 0.0, 1.0);
    });
}

}  // namespace

TEST_CASE("slic with one target covers the whole image") {
    SlicParams p;
    p.target_count = 1;
    const auto m = slic(GrayImage::filled(40, 30, 0.5f), p);
    CHECK(m.n_superpixels == 1);
    CHECK(std::all_of(m.labels.begin(), m.labels.end(), [](int l) { return l == 0; }));
    CHECK(m.areas[0] == 1200);
}

TEST_CASE("slic partitions the foreground into connected superpixels") {
    auto img = noisy(200, 160, 4);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 200; ++x) img.foreground[img.index(x, y)] = 0;
    }
    SlicParams p;
    p.target_count = 60;
    const auto m = slic(img, p);
    std::int64_t sum = 0;
    for (const auto a : m.areas) {
        CHECK(a > 0);
        sum += a;
    }
    CHECK(sum == static_cast<std::int64_t>(img.foreground_count()));
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        CHECK((img.foreground[i] != 0) == (m.labels[i] >= 0));
        if (m.labels[i] >= 0) CHECK(m.labels[i] < m.n_superpixels);
    }
    CHECK(all_connected(m));
    CHECK(slic(img, p).labels == m.labels);
}

TEST_CASE("slic on a uniform 512x512 image follows grid arithmetic") {
    SlicParams p;
    p.target_count = 256;
    const auto m = slic(GrayImage::filled(512, 512, 0.5f), p);
    CHECK(m.n_superpixels >= 205);
    CHECK(m.n_superpixels <= 307);
    const double mean_area = 512.0 * 512.0 / m.n_superpixels;
    CHECK(mean_area >= 0.75 * 1024);
    CHECK(mean_area <= 1.25 * 1024);
    CHECK(all_connected(m));
}

TEST_CASE("slic rejects bad parameters") {
    SlicParams p;
    p.target_count = 0;
    CHECK_THROWS_AS(slic(GrayImage::filled(8, 8, 0.5f), p), ParameterError);
    p.target_count = 65;
    CHECK_THROWS_AS(slic(GrayImage::filled(8, 8, 0.5f), p), ParameterError);
    p.target_count = 4;
    p.compactness = 0.0;
    CHECK_THROWS_AS(slic(GrayImage::filled(8, 8, 0.5f), p), ParameterError);
}

TEST_CASE("adjacency of a vertical split") {
    std::vector<std::int32_t> labels(100);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) labels[static_cast<std::size_t>(y) * 10 + x] = x < 5 ? 0 : 1;
    }
    const auto g = build_adjacency(testutil::map_from(10, 10, labels));
    CHECK(g.neighbors(0) == std::vector<int>{1});
    CHECK(g.neighbors(1) == std::vector<int>{0});
    const auto s = segment_geometry(g, 0, 1);
    CHECK(s.midpoint.x == doctest::Approx(5.0).epsilon(0.1));
    CHECK(s.midpoint.y == doctest::Approx(4.5));
    CHECK(segment_geometry(g, 1, 0).midpoint == s.midpoint);
    CHECK(s.border.size() == 20);
}

TEST_CASE("grid adjacency is symmetric with four neighbours inside") {
    const auto g = build_adjacency(testutil::grid_map(3, 3, 4));
    CHECK(g.neighbors(4) == std::vector<int>{1, 3, 5, 7});
    CHECK(g.neighbors(0) == std::vector<int>{1, 3});
    for (int i = 0; i < g.size(); ++i) {
        for (const int j : g.neighbors(i)) {
            CHECK(j != i);
            CHECK(g.adjacent(j, i));
        }
    }
    CHECK_THROWS_AS(g.border(0, 8), LookupError);
    CHECK_THROWS_AS(segment_geometry(g, 0, 4), LookupError);
}

TEST_CASE("L-shaped border midpoint is the mean of its pixels") {
    // 6x6 map: superpixel 0 is the 3x3 top-left block, 1 the rest.
    // Side 0 border: (2,0) (2,1) (2,2) (0,2) (1,2).
    // Side 1 border: (3,0) (3,1) (3,2) (0,3) (1,3) (2,3).  (3,3) touches only 1.
    // Sums: x = 19, y = 19 over 11 pixels.
    std::vector<std::int32_t> labels(36, 1);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) labels[static_cast<std::size_t>(y) * 6 + x] = 0;
    }
    const auto g = build_adjacency(testutil::map_from(6, 6, labels));
    const auto s = segment_geometry(g, 0, 1);
    CHECK(s.border.size() == 11);
    CHECK(s.midpoint.x == doctest::Approx(19.0 / 11.0));
    CHECK(s.midpoint.y == doctest::Approx(19.0 / 11.0));
}

TEST_CASE("superpixel map statistics and diameter") {
    const auto m = testutil::grid_map(2, 2, 5);
    CHECK(m.n_superpixels == 4);
    CHECK(m.areas == std::vector<std::int64_t>{25, 25, 25, 25});
    CHECK(m.centroids[3].x == doctest::Approx(7.0));
    CHECK(m.foreground_area() == 100);
    CHECK(m.mean_diameter() == doctest::Approx(2.0 * std::sqrt(25.0 / std::numbers::pi)));
}

TEST_CASE("superpixel map files round trip") {
    auto m = testutil::grid_map(4, 3, 6);
    m.labels[0] = SuperpixelMap::kBackground;
    recompute_statistics(m);
    m.rng_seed = 42;
    const auto dir = std::filesystem::temp_directory_path() / "texmark_sp_test";
    std::filesystem::create_directories(dir);
    write_superpixel_map(m, dir / "sp.png", dir / "sp.json");
    const auto back = read_superpixel_map(dir / "sp.png", dir / "sp.json");
    CHECK(back.labels == m.labels);
    CHECK(back.n_superpixels == m.n_superpixels);
    CHECK(back.areas == m.areas);
    CHECK(back.rng_seed == 42);
    std::filesystem::remove_all(dir);
}
