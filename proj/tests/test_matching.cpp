#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "texmark/error.hpp"
#include "texmark/matching.hpp"

using namespace texmark;
using namespace texmark::matching;
using testutil::hist;

namespace {

double chi2_oracle(const std::vector<std::int64_t>& p, const std::vector<std::int64_t>& q) {
    double sp = 0, sq = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        sp += p[k];
        sq += q[k];
    }
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double a = p[k] / sp, b = q[k] / sq;
        if (a + b > 0) s += (a - b) * (a - b) / (a + b);
    }
    return 0.5 * s;
}

double brute_force_min(const std::vector<double>& c, int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c[static_cast<std::size_t>(i) * n + perm[i]];
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Landmark make_landmark(std::vector<PointF> pts, TextonHistogram interior, std::vector<TextonHistogram> ext = {},
                       LandmarkKind kind = LandmarkKind::Closed) {
    Landmark l;
    l.kind = kind;
    for (std::size_t i = 0; i < pts.size(); ++i) l.segments.push_back({static_cast<int>(i), static_cast<int>(i) + 100});
    if (ext.empty()) ext.assign(pts.size(), hist({1, 1, 1}));
    l.exterior = std::move(ext);
    l.midpoints = std::move(pts);
    l.centroid = mean_point(l.midpoints);
    l.interior = std::move(interior);
    l.members = {0};
    return l;
}

std::vector<PointF> rectangle(double w, double h) {
    return {{0, 0}, {w / 2, 0}, {w, 0}, {w, h / 2}, {w, h}, {w / 2, h}, {0, h}, {0, h / 2}};
}

Landmark with_segments(std::vector<Segment> segs, LandmarkKind kind) {
    Landmark l;
    l.kind = kind;
    l.segments = std::move(segs);
    for (std::size_t i = 0; i < l.segments.size(); ++i) {
        l.midpoints.push_back({static_cast<double>(i), 0.0});
        l.exterior.push_back(hist({1, 2}));
    }
    l.interior = hist({2, 1});
    l.centroid = mean_point(l.midpoints);
    return l;
}

}  // namespace

TEST_CASE("unify keeps disjoint landmarks and drops coinciding open ones strictly above threshold") {
    const auto closed = with_segments({{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}, LandmarkKind::Closed);
    SUBCASE("no overlap") {
        const auto open = with_segments({{7, 8}, {8, 9}}, LandmarkKind::Open);
        const auto u = unify_landmarks({closed}, {open, open}, 0.5);
        CHECK(u.size() == 3);
        CHECK(u[0].kind == LandmarkKind::Closed);
        CHECK(u[1].id == 1);
        CHECK(u[2].rank == 1);
    }
    SUBCASE("overlap 0.8 is dropped") {
        const auto open = with_segments({{0, 1}, {0, 2}, {0, 3}, {0, 4}}, LandmarkKind::Open);
        CHECK(unify_landmarks({closed}, {open}, 0.5).size() == 1);
    }
    SUBCASE("overlap exactly at the threshold is kept") {
        const auto open = with_segments({{0, 1}, {0, 2}, {0, 3}, {9, 9}}, LandmarkKind::Open);
        // |A n B| = 3, |A u B| = 6.
        CHECK(unify_landmarks({closed}, {open}, 0.5).size() == 2);
    }
}

TEST_CASE("shape context counts") {
    const std::vector<PointF> two = {{0, 0}, {3, 4}};
    for (const auto& d : shape_context(two)) CHECK(std::accumulate(d.begin(), d.end(), std::int64_t{0}) == 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<PointF> pts(17);
    for (auto& p : pts) p = {u(rng), u(rng)};
    for (const auto& d : shape_context(pts)) {
        CHECK(d.size() == 60);
        CHECK(std::accumulate(d.begin(), d.end(), std::int64_t{0}) == 16);
    }
    CHECK_THROWS_AS(shape_context(std::vector<PointF>{{1, 1}}), ParameterError);
}

TEST_CASE("shape contexts of the unit square corners") {
    // Mean pairwise distance (4 + 2 sqrt 2) / 6 = 1.1381: sides normalize to
    // 0.879 (ring 3 of edges 0.125 * 16^(k/5) = .125 .218 .379 .660 1.149 2),
    // diagonals to 1.243 (ring 4). Wedges are 30 degrees in image coordinates.
    const std::vector<PointF> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto sc = shape_context(sq);
    auto bins = [](std::initializer_list<std::pair<int, int>> rw) {
        std::vector<std::int64_t> v(60, 0);
        for (const auto& [r, w] : rw) ++v[static_cast<std::size_t>(r * 12 + w)];
        return v;
    };
    CHECK(sc[0] == bins({{3, 0}, {4, 1}, {3, 3}}));   // 0, 45, 90 degrees
    CHECK(sc[1] == bins({{3, 6}, {3, 3}, {4, 4}}));   // 180, 90, 135
    CHECK(sc[2] == bins({{4, 7}, {3, 9}, {3, 6}}));   // 225, 270, 180
    CHECK(sc[3] == bins({{3, 9}, {4, 10}, {3, 0}}));  // 270, 315, 0
}

TEST_CASE("hungarian small cases") {
    const auto a = hungarian(std::vector<double>{0.0}, 1, 1);
    CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(a.cost == 0.0);
    const auto b = hungarian(std::vector<double>{1, 2, 2, 1}, 2, 2);
    CHECK(b.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(b.cost == 2.0);
    // All-equal costs: lexicographically smallest assignment is the identity.
    const auto c = hungarian(std::vector<double>(9, 1.0), 3, 3);
    CHECK(c.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
    // Rectangular: 3 rows, 2 columns; row 1 left out.
    const auto d = hungarian(std::vector<double>{1, 5, 9, 9, 5, 1}, 3, 2);
    CHECK(d.pairs == std::vector<std::pair<int, int>>{{0, 0}, {2, 1}});
    CHECK(d.cost == 2.0);
    CHECK_THROWS_AS(hungarian(std::vector<double>{}, 0, 0), ParameterError);
    CHECK_THROWS_AS(hungarian(std::vector<double>{std::nan("")}, 1, 1), ParameterError);
}

TEST_CASE("hungarian equals the permutation minimum on random 7x7 matrices") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> u(0, 50);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> c(49);
        for (auto& x : c) x = u(rng);
        const auto a = hungarian(c, 7, 7);
        CHECK(a.cost == brute_force_min(c, 7));
        double s = 0.0;
        for (const auto& [i, j] : a.pairs) s += c[static_cast<std::size_t>(i) * 7 + j];
        CHECK(s == a.cost);
    }
}

TEST_CASE("interior distance") {
    const auto a = make_landmark(rectangle(2, 2), hist({3, 1, 0}));
    const auto b = make_landmark(rectangle(2, 2), hist({0, 0, 5}));
    const auto c = make_landmark(rectangle(2, 2), hist({1, 2, 3}));
    CHECK(d_interior(a, a) == 0.0);
    CHECK(d_interior(a, b) == doctest::Approx(1.0));
    CHECK(d_interior(a, c) == doctest::Approx(chi2_oracle({3, 1, 0}, {1, 2, 3})));
}

TEST_CASE("shape distance") {
    const auto sq = make_landmark(rectangle(10, 10), hist({1, 1}));
    const auto self = d_shape(sq, sq);
    CHECK(self.cost == 0.0);
    for (const auto& [i, j] : self.correspondence) CHECK(i == j);

    std::vector<PointF> moved = rectangle(10, 10);
    for (auto& p : moved) p = {p.x + 37.5, p.y - 12.0};
    CHECK(d_shape(sq, make_landmark(moved, hist({1, 1}))).cost == doctest::Approx(0.0));

    // Square vs elongated rectangle against a brute-force matching oracle.
    const auto rect = make_landmark(rectangle(30, 6), hist({1, 1}));
    const auto sa = shape_context(sq.midpoints);
    const auto sb = shape_context(rect.midpoints);
    std::vector<double> cost(64);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) cost[i * 8 + j] = chi2_oracle(sa[i], sb[j]);
    }
    const auto d = d_shape(sq, rect);
    CHECK(d.cost > 0.0);
    CHECK(d.cost == doctest::Approx(brute_force_min(cost, 8) / 8.0));
    CHECK(d.correspondence.size() == 8);
}

TEST_CASE("subsampling bounds the point count") {
    CHECK(subsample_indices(10, 60).size() == 10);
    const auto idx = subsample_indices(300, 60);
    CHECK(idx.size() == 60);
    CHECK(idx.front() == 0);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(idx[1] == 5);
}

TEST_CASE("exterior distance") {
    const std::vector<TextonHistogram> ea = {hist({1, 0}), hist({2, 2}), hist({0, 3})};
    const std::vector<TextonHistogram> eb = {hist({1, 1}), hist({5, 1}), hist({0, 3})};
    const auto a = make_landmark({{0, 0}, {1, 0}, {2, 0}}, hist({1, 1}), ea);
    const auto b = make_landmark({{0, 0}, {1, 0}, {2, 0}}, hist({1, 1}), eb);
    const std::vector<std::pair<int, int>> same = {{0, 0}, {1, 1}, {2, 2}};
    CHECK(d_exterior(a, a, same) == 0.0);
    const std::vector<std::pair<int, int>> one = {{1, 0}};
    CHECK(d_exterior(a, b, one) == doctest::Approx(chi2_oracle({2, 2}, {1, 1})));
    const std::vector<std::pair<int, int>> three = {{0, 1}, {1, 0}, {2, 2}};
    const double expect = chi2_oracle({1, 0}, {5, 1}) + chi2_oracle({2, 2}, {1, 1}) + 0.0;
    CHECK(d_exterior(a, b, three) == doctest::Approx(expect));
    CHECK(d_exterior(a, b, three, true) == doctest::Approx(expect / 3.0));
}

TEST_CASE("location hinge") {
    auto a = make_landmark({{0, 0}, {2, 0}}, hist({1}));
    auto b = a;
    const double l = 500.0;
    CHECK(d_location(a, b, l) == 0.0);
    b.centroid = {a.centroid.x + 0.5 * l, a.centroid.y};
    CHECK(d_location(a, b, l) == 0.0);
    b.centroid = {a.centroid.x, a.centroid.y + 1.5 * l};
    CHECK(d_location(a, b, l) == doctest::Approx(0.5 * l));
}

TEST_CASE("landmark distance is the weighted four-term sum") {
    MatchWeights w;
    w.tolerance_px = 5.0;
    const auto a = make_landmark(rectangle(10, 10), hist({4, 1, 2}),
                                 std::vector<TextonHistogram>(8, hist({1, 2, 3})));
    auto pts = rectangle(18, 7);
    for (auto& p : pts) p.x += 20.0;
    std::vector<TextonHistogram> eb;
    for (int i = 0; i < 8; ++i) eb.push_back(hist({1 + i, 2, 3}));
    const auto b = make_landmark(pts, hist({1, 1, 5}), eb);

    const auto self = landmark_distance(a, a, w);
    CHECK(self.total == 0.0);
    CHECK(self.d_int == 0.0);
    CHECK(self.d_shape == 0.0);
    CHECK(self.d_ext == 0.0);
    CHECK(self.d_loc == 0.0);

    const auto m = landmark_distance(a, b, w);
    const auto s = d_shape(a, b, w);
    const double expect = w.w_int * chi2_oracle({4, 1, 2}, {1, 1, 5}) + w.w_shape * s.cost +
                          w.w_ext * d_exterior(a, b, s.correspondence) + w.w_loc * d_location(a, b, 5.0);
    CHECK(m.total == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(m.total - weighted_total(m, w)) <= 1e-9);
    CHECK(m.d_loc > 0.0);

    SUBCASE("symmetry") { CHECK(std::abs(landmark_distance(b, a, w).total - m.total) <= 1e-9); }
    SUBCASE("without the location term D ignores centroids") {
        w.w_loc = 0.0;
        auto far = b;
        for (auto& p : far.midpoints) p = {p.x + 1000.0, p.y - 700.0};
        far.centroid = mean_point(far.midpoints);
        CHECK(std::abs(landmark_distance(a, far, w).total - landmark_distance(a, b, w).total) <= 1e-9);
    }
}

TEST_CASE("mutual nearest matching") {
    MatchWeights w;
    const auto a = make_landmark(rectangle(10, 10), hist({5, 1}));
    const auto b = make_landmark(rectangle(30, 5), hist({1, 5}));
    SUBCASE("single pair always matches") {
        const auto m = mutual_nearest_match(std::vector<Landmark>{a}, std::vector<Landmark>{b}, w);
        REQUIRE(m.size() == 1);
        CHECK(m[0].a == 0);
        CHECK(m[0].b == 0);
    }
    SUBCASE("mutuality") {
        // Row 0 prefers column 0, but column 0 prefers row 1.
        std::vector<LandmarkMatch> table(4);
        const double d[4] = {1.0, 2.0, 0.5, 3.0};
        for (int i = 0; i < 4; ++i) {
            table[i].a = i / 2;
            table[i].b = i % 2;
            table[i].total = d[i];
        }
        const auto m = mutual_nearest(table, 2, 2);
        REQUIRE(m.size() == 1);
        CHECK(m[0].a == 1);
        CHECK(m[0].b == 0);
    }
    SUBCASE("random 5x5 tables against exhaustive enumeration") {
        std::mt19937_64 rng(8);
        std::uniform_int_distribution<int> u(0, 9);
        for (int t = 0; t < 200; ++t) {
            std::vector<LandmarkMatch> table(25);
            for (int i = 0; i < 25; ++i) {
                table[i].a = i / 5;
                table[i].b = i % 5;
                table[i].total = u(rng);
            }
            std::vector<std::pair<int, int>> expect;
            for (int i = 0; i < 5; ++i) {
                for (int j = 0; j < 5; ++j) {
                    bool row_min = true, col_min = true;
                    for (int k = 0; k < 5; ++k) {
                        const double r = table[i * 5 + k].total, c = table[k * 5 + j].total;
                        const double v = table[i * 5 + j].total;
                        if (r < v || (r == v && k < j)) row_min = false;
                        if (c < v || (c == v && k < i)) col_min = false;
                    }
                    if (row_min && col_min) expect.push_back({i, j});
                }
            }
            std::vector<std::pair<int, int>> got;
            for (const auto& m : mutual_nearest(table, 5, 5)) got.push_back({m.a, m.b});
            CHECK(got == expect);
            std::vector<int> bs;
            for (const auto& g : got) bs.push_back(g.second);
            std::sort(bs.begin(), bs.end());
            CHECK(std::adjacent_find(bs.begin(), bs.end()) == bs.end());
        }
    }
}

TEST_CASE("landmark json round trip and match report schema") {
    auto l = make_landmark(rectangle(4, 6), hist({3, 0, 2}), {}, LandmarkKind::Open);
    l.id = 7;
    l.rank = 2;
    l.score = 1.25;
    l.members = {3, 9};
    const auto back = landmark_from_json(landmark_to_json(l));
    CHECK(back.id == 7);
    CHECK(back.kind == LandmarkKind::Open);
    CHECK(back.segments == l.segments);
    CHECK(back.midpoints == l.midpoints);
    CHECK(back.interior == l.interior);
    CHECK(back.members == l.members);
    CHECK_THROWS_AS(landmark_from_json(nlohmann::json{{"id", 1}}), InputError);

    MatchWeights w;
    const auto m = mutual_nearest_match(std::vector<Landmark>{l}, std::vector<Landmark>{l}, w);
    const auto r = match_report(m, w);
    CHECK(r.at("version") == kMatchReportVersion);
    REQUIRE(r.at("pairs").size() == 1);
    for (const char* k : {"a", "b", "D", "D_int", "D_shape", "D_ext", "D_loc"}) CHECK(r["pairs"][0].contains(k));
    CHECK(r.at("tolerance_px") == 500.0);
    CHECK(r.at("weights").at("w_ext") == 0.5);
    MatchWeights w2;
    from_json(r.at("weights"), w2);
    CHECK(w2 == w);
}
