#include <doctest.h>

#include <cmath>
#include <set>

#include "texmark/error.hpp"
#include "texmark/synthbench.hpp"

using namespace texmark;
using namespace texmark::synthbench;

namespace {

SceneSpec base_spec(int w = 96, int h = 96) {
    SceneSpec s;
    s.width = w;
    s.height = h;
    s.rng_seed = 4;
    TextureSpec bg;
    bg.kind = TextureKind::Noise;
    TextureSpec g;
    g.kind = TextureKind::Grating;
    g.frequency = 0.2;
    g.orientation_deg = 30.0;
    TextureSpec dots;
    dots.kind = TextureKind::Dots;
    s.textures = {bg, g, dots};
    return s;
}

ShapeSpec ellipse(double x, double y, double rx, double ry, int texture) {
    ShapeSpec e;
    e.kind = ShapeKind::Ellipse;
    e.center = {x, y};
    e.rx = rx;
    e.ry = ry;
    e.texture = texture;
    return e;
}

}  // namespace

TEST_CASE("scene without shapes is all background") {
    const auto scene = render_scene(base_spec());
    CHECK(std::all_of(scene.labels.begin(), scene.labels.end(), [](int l) { return l == 0; }));
    CHECK(scene.n_structures() == 0);
}

TEST_CASE("three ellipses give four labels and deterministic renders") {
    auto spec = base_spec(160, 160);
    spec.shapes = {ellipse(30, 30, 15, 10, 1), ellipse(100, 40, 20, 12, 2), ellipse(60, 120, 18, 18, 1)};
    const auto a = render_scene(spec);
    std::set<int> labels(a.labels.begin(), a.labels.end());
    CHECK(labels == std::set<int>{0, 1, 2, 3});
    const auto b = render_scene(spec);
    CHECK(a.image.intensities == b.image.intensities);
    CHECK(a.labels == b.labels);
}

TEST_CASE("invalid scenes are rejected") {
    auto spec = base_spec();
    spec.shapes = {ellipse(40, 40, 20, 20, 1), ellipse(50, 45, 20, 20, 2)};
    CHECK_THROWS_AS(render_scene(spec), SpecError);
    spec.shapes = {ellipse(5, 40, 20, 20, 1)};
    CHECK_THROWS_AS(render_scene(spec), SpecError);
    spec.shapes = {ellipse(40, 40, 10, 10, 7)};
    CHECK_THROWS_AS(render_scene(spec), SpecError);
}

TEST_CASE("spec json round trip and validation") {
    auto spec = base_spec();
    spec.shapes = {ellipse(40, 40, 10, 12, 1)};
    ShapeSpec half;
    half.kind = ShapeKind::HalfOpen;
    half.center = {20, 70};
    half.rx = half.ry = 8;
    half.falloff = 10;
    half.sharp_direction_deg = 45;
    spec.shapes.push_back(half);
    const nlohmann::json j = spec;
    const auto back = j.get<SceneSpec>();
    CHECK(render_scene(back).image.intensities == render_scene(spec).image.intensities);

    DistortionSpec d;
    d.rotation_deg = 12.5;
    d.translation = {3, -4};
    const nlohmann::json dj = d;
    CHECK(dj.get<DistortionSpec>().rotation_deg == 12.5);
    auto bad = dj;
    bad["rotation_deg"] = 200.0;
    CHECK_THROWS_AS(bad.get<DistortionSpec>(), SpecError);
    const nlohmann::json not_a_scene = {{"shapes", 3}};
    CHECK_THROWS_AS(not_a_scene.get<SceneSpec>(), SpecError);
}

TEST_CASE("identity distortion leaves the image unchanged") {
    auto spec = base_spec();
    spec.shapes = {ellipse(48, 48, 20, 15, 1)};
    const auto scene = render_scene(spec);
    const auto out = distort(scene.image, scene.labels, DistortionSpec{});
    CHECK(out.image.intensities == scene.image.intensities);
    CHECK(out.labels == scene.labels);
}

TEST_CASE("a 90 degree rotation moves labels exactly") {
    auto spec = base_spec(64, 64);
    spec.shapes = {ellipse(20, 30, 12, 6, 1), ellipse(45, 20, 5, 9, 2)};
    const auto scene = render_scene(spec);
    DistortionSpec d;
    d.rotation_deg = 90.0;
    const auto out = distort(scene.image, scene.labels, d);
    // Output (x, y) samples the source at (y, 63 - x) about the centre (31.5, 31.5).
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const auto i = static_cast<std::size_t>(y) * 64 + x;
            const auto j = static_cast<std::size_t>(63 - x) * 64 + y;
            REQUIRE(out.labels[i] == scene.labels[j]);
            REQUIRE(out.image.intensities[i] == doctest::Approx(scene.image.intensities[j]).epsilon(1e-5));
        }
    }
}

TEST_CASE("elastic jitter stays within its amplitude and drives the label lookup") {
    auto spec = base_spec(128, 128);
    spec.shapes = {ellipse(64, 64, 30, 20, 1)};
    const auto scene = render_scene(spec);
    DistortionSpec d;
    d.jitter_amplitude = 5.0;
    d.jitter_scale = 40.0;
    d.rng_seed = 9;
    double largest = 0.0;
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) {
            const auto e = elastic_displacement(d, x, y);
            largest = std::max(largest, std::hypot(e.x, e.y));
        }
    }
    CHECK(largest <= 5.0 + 1e-12);
    CHECK(largest >= 2.5);
    const auto out = distort(scene.image, scene.labels, d);
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) {
            const auto e = elastic_displacement(d, x, y);
            const long sx = std::lround(x + e.x), sy = std::lround(y + e.y);
            const int expect = (sx < 0 || sy < 0 || sx >= 128 || sy >= 128) ? 0 : scene.labels[sy * 128 + sx];
            REQUIRE(out.labels[static_cast<std::size_t>(y) * 128 + x] == expect);
        }
    }
}

TEST_CASE("random scenes and distortions respect their limits") {
    const auto spec = random_scene(1000, 1024, 1024);
    REQUIRE(spec.shapes.size() == 6);
    CHECK(spec.shapes.back().kind == ShapeKind::HalfOpen);
    std::set<int> textures;
    for (const auto& s : spec.shapes) textures.insert(s.texture);
    CHECK(textures.size() == 6);
    const auto scene = render_scene(spec);
    CHECK(scene.open_edges.back().size() > 2);
    for (int k = 0; k < 6; ++k) {
        CHECK(std::count(scene.labels.begin(), scene.labels.end(), k + 1) > 1000);
    }
    const auto d = random_distortion(2000, scene);
    CHECK(std::abs(d.rotation_deg) <= 15.0);
    CHECK(std::abs(d.translation.x) <= 300.0);
    CHECK(std::abs(d.translation.y) <= 300.0);
    CHECK(d.jitter_amplitude <= 8.0);
    CHECK(d.noise_sigma <= 0.05);
    const auto moved = distort(scene.image, scene.labels, d);
    for (int k = 0; k < 6; ++k) {
        const auto before = std::count(scene.labels.begin(), scene.labels.end(), k + 1);
        const auto after = std::count(moved.labels.begin(), moved.labels.end(), k + 1);
        CHECK(std::abs(static_cast<double>(after - before)) <= 0.05 * static_cast<double>(before));
    }
}

TEST_CASE("detection scoring") {
    // 4 x 2 canvas: structure 0 on the left half, structure 1 on the right.
    const std::vector<std::int32_t> labels = {1, 1, 2, 2, 1, 1, 2, 2};
    const std::vector<int> planted = {0, 1};
    const std::vector<std::vector<std::uint8_t>> exact = {{1, 1, 0, 0, 1, 1, 0, 0}, {0, 0, 1, 1, 0, 0, 1, 1}};
    auto s = score_detection(exact, labels, planted);
    CHECK(s.recall == 1.0);
    CHECK(s.precision == 1.0);
    s = score_detection(std::vector<std::vector<std::uint8_t>>{}, labels, planted);
    CHECK(s.recall == 0.0);

    // 10 x 1 canvas: structure 0 covers 5 pixels; a 4-pixel detection inside has IoU 0.8.
    const std::vector<std::int32_t> strip = {1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
    const std::vector<std::vector<std::uint8_t>> partial = {{1, 1, 1, 1, 0, 0, 0, 0, 0, 0}};
    s = score_detection(partial, strip, planted);
    CHECK(s.best_iou[0] == doctest::Approx(0.8));
    CHECK(s.recall == 0.5);
    CHECK(score_detection(partial, strip, planted, 0.9).recall <= s.recall);
}

TEST_CASE("matching scoring by hand enumeration") {
    std::vector<LandmarkTruth> ta(6), tb(6);
    for (int k = 0; k < 6; ++k) {
        ta[k] = {k, {k}};
        tb[k] = {k, {k}};
    }
    tb[2].touched = {1, 2};
    std::vector<matching::LandmarkMatch> m(5);
    m[0].a = 0, m[0].b = 0;  // correct
    m[1].a = 1, m[1].b = 2;  // partial: structure 1 touched on both sides
    m[2].a = 3, m[2].b = 4;  // wrong
    m[3].a = 5, m[3].b = 5;  // correct
    m[4].a = 2, m[4].b = 2;  // correct
    const auto s = score_matching(m, ta, tb, 6);
    CHECK(s.correct == 3);
    CHECK(s.partial == 1);
    CHECK(s.wrong == 1);
    CHECK(s.fraction_correct() == doctest::Approx(0.6));
    CHECK(s.structures_matched == 3);
    CHECK(s.fraction_structures() == doctest::Approx(0.5));

    std::vector<matching::LandmarkMatch> same(6);
    for (int k = 0; k < 6; ++k) same[k].a = same[k].b = k;
    CHECK(score_matching(same, ta, ta, 6).fraction_correct() == 1.0);

    const auto none = score_matching(std::vector<matching::LandmarkMatch>{}, ta, tb, 6);
    CHECK(none.no_matches);
    CHECK(none.fraction_correct() == 0.0);
    CHECK(none.fraction_partial() == 0.0);
    CHECK(none.fraction_wrong() == 0.0);
}

TEST_CASE("polyline distances") {
    const std::vector<PointF> line = {{0, 0}, {10, 0}};
    CHECK(point_to_polyline({5, 3}, line) == doctest::Approx(3.0));
    CHECK(point_to_polyline({13, 4}, line) == doctest::Approx(5.0));
    const std::vector<PointF> pts = {{1, 1}, {2, 5}, {20, 0}};
    CHECK(fraction_within(pts, line, 2.0) == doctest::Approx(1.0 / 3.0));
    CHECK(mean_distance(pts, line) == doctest::Approx((1.0 + 5.0 + 10.0) / 3.0));
}
