#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "linkage_oracle.hpp"
#include "texmark/error.hpp"
#include "texmark/regions.hpp"

using namespace texmark;
using namespace texmark::regions;
using testutil::hist;

namespace {

struct Toy {
    segmentation::AdjacencyGraph graph;
    std::vector<TextonHistogram> hists;
    std::vector<std::int64_t> areas;
    std::set<int> disk;
};

// 16 x 16 grid of square superpixels; cells near the centre carry texture A.
Toy disk_toy() {
    Toy t;
    const auto m = testutil::grid_map(16, 16, 4);
    t.graph = segmentation::build_adjacency(m);
    for (int i = 0; i < 256; ++i) {
        const int gx = i % 16, gy = i / 16;
        const double d2 = (gx - 7.5) * (gx - 7.5) + (gy - 7.5) * (gy - 7.5);
        const bool in = d2 <= 6.5;
        if (in) t.disk.insert(i);
        t.hists.push_back(in ? hist({80, 20, 0}) : hist({5, 15, 80}));
        t.areas.push_back(16);
    }
    return t;
}

std::vector<std::set<std::size_t>> partition(const std::vector<int>& labels) {
    std::map<int, std::set<std::size_t>> by;
    for (std::size_t i = 0; i < labels.size(); ++i) by[labels[i]].insert(i);
    std::vector<std::set<std::size_t>> out;
    for (auto& [_, s] : by) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("jaccard distance") {
    CHECK(jaccard_distance(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}) == 0.0);
    CHECK(jaccard_distance(std::vector<int>{1, 2}, std::vector<int>{3, 4}) == 1.0);
    CHECK(jaccard_distance(std::vector<int>{1, 2, 3}, std::vector<int>{2, 3, 4}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(jaccard_distance(std::vector<int>{}, std::vector<int>{1}), ParameterError);
}

TEST_CASE("compactness term") {
    Region r;
    r.members = {0, 1, 2, 3};
    r.frontier = {4, 5, 6, 7, 8, 9, 10, 11};
    CHECK(score_compactness(r) == 0.5);
    r.members = {0};
    r.frontier = {1, 2, 3, 4, 5, 6};
    CHECK(score_compactness(r) == 6.0);
    r.members.resize(100);
    r.frontier.resize(40);
    CHECK(score_compactness(r) == doctest::Approx(0.004));
}

TEST_CASE("contrast and coherence terms") {
    const auto g = segmentation::build_adjacency(testutil::grid_map(3, 1, 4));
    SUBCASE("identical frontier gives -1") {
        const std::vector<TextonHistogram> h = {hist({10, 5}), hist({20, 10}), hist({1, 30})};
        const auto r = make_region({0}, g, h);
        CHECK(score_contrast(r, h) == doctest::Approx(-1.0));
    }
    SUBCASE("disjoint frontier gives about 0") {
        const std::vector<TextonHistogram> h = {hist({0, 500}), hist({500, 0}), hist({0, 500})};
        const auto r = make_region({1}, g, h);
        const double c = score_contrast(r, h);
        CHECK(c <= 0.0);
        CHECK(c > -1e-10);
    }
    SUBCASE("adding an identical frontier superpixel never raises contrast") {
        const std::vector<TextonHistogram> h = {hist({30, 10}), hist({10, 30}), hist({3, 1})};
        Region r;
        r.members = {0};
        r.frontier = {1};
        r.histogram = h[0];
        Region wider = r;
        wider.frontier = {1, 2};
        CHECK(score_contrast(wider, h) <= score_contrast(r, h));
        CHECK(score_contrast(wider, h) == doctest::Approx(-1.0));
    }
    SUBCASE("coherence") {
        const std::vector<TextonHistogram> same = {hist({4, 6}), hist({8, 12}), hist({2, 3})};
        CHECK(score_coherence(make_region({1}, g, same), same) == doctest::Approx(1.0));
        CHECK(score_coherence(make_region({0, 1, 2}, g, same), same) == doctest::Approx(1.0));
        const std::vector<TextonHistogram> mixed = {hist({400, 0}), hist({0, 400}), hist({400, 0})};
        CHECK(score_coherence(make_region({0, 1, 2}, g, mixed), mixed) < 0.5);
    }
    CHECK_THROWS_AS(score_contrast(make_region({0, 1, 2}, g, std::vector<TextonHistogram>(3, hist({1, 1}))),
                                   std::vector<TextonHistogram>(3, hist({1, 1}))),
                    ParameterError);
}

TEST_CASE("significance is the weighted, linear three-term sum") {
    const auto g = segmentation::build_adjacency(testutil::grid_map(4, 4, 3));
    std::vector<TextonHistogram> h;
    for (int i = 0; i < 16; ++i) h.push_back(hist({10 + i, 20 - i, 3 * (i % 4)}));
    const auto r = make_region({5, 6, 9, 10}, g, h);
    REQUIRE(r.frontier.size() == 8);
    SignificanceWeights w1{1, 0, 0};
    CHECK(significance(r, w1, h) == score_contrast(r, h));
    SignificanceWeights w3{0, 0, 1};
    CHECK(significance(r, w3, h) == 0.5);
    SignificanceWeights a{0.3, 0.7, 0.2}, b{0.5, -0.1, 0.9};
    SignificanceWeights ab{0.8, 0.6, 1.1};
    CHECK(significance(r, ab, h) == doctest::Approx(significance(r, a, h) + significance(r, b, h)).epsilon(1e-12));
    const auto t = significance_terms(r, a, h);
    CHECK(std::abs(t.total - (0.3 * t.contrast + 0.7 * t.coherence + 0.2 * t.compactness)) <= 1e-9);
}

TEST_CASE("growth from inside a planted disk returns the disk") {
    const auto t = disk_toy();
    REQUIRE(t.disk.size() >= 18);
    REQUIRE(t.disk.size() <= 25);
    GrowthOptions opt;
    const int seed = *t.disk.begin();
    const auto p = grow_region(seed, t.graph, t.hists, t.areas, opt);
    CHECK(std::set<int>(p.members.begin(), p.members.end()) == t.disk);

    double best = -1e300;
    for (const auto& s : p.trace) best = std::max(best, s.score);
    CHECK(p.score == best);
    // Stored score equals F recomputed on the returned region.
    const auto r = make_region(p.members, t.graph, t.hists);
    CHECK(std::abs(significance(r, opt.weights, t.hists) - p.score) <= 1e-9);

    // Every added superpixel touched the region built so far.
    std::set<int> so_far{p.trace.front().added};
    for (std::size_t i = 1; i < p.trace.size(); ++i) {
        const int a = p.trace[i].added;
        CHECK(!so_far.count(a));
        bool touches = false;
        for (const int nb : t.graph.neighbors(a)) touches = touches || so_far.count(nb);
        CHECK(touches);
        so_far.insert(a);
    }
}

TEST_CASE("uniform texture grows to the area cap") {
    const auto m = testutil::grid_map(16, 16, 4);
    const auto g = segmentation::build_adjacency(m);
    const std::vector<TextonHistogram> h(256, hist({7, 9}));
    const std::vector<std::int64_t> areas(256, 16);
    const auto p = grow_region(0, g, h, areas, GrowthOptions{});
    CHECK(std::abs(static_cast<double>(p.trace.size()) - 25.6) <= 1.0);
    CHECK_THROWS_AS(grow_region(256, g, h, areas, GrowthOptions{}), ParameterError);
}

TEST_CASE("proposals do not depend on seed order") {
    const auto t = disk_toy();
    const auto all = grow_all(t.graph, t.hists, t.areas, GrowthOptions{});
    REQUIRE(all.size() == 256);
    for (const int seed : {0, 77, 119, 255}) {
        const auto single = grow_region(seed, t.graph, t.hists, t.areas, GrowthOptions{});
        CHECK(single.members == all[static_cast<std::size_t>(seed)].members);
        CHECK(single.score == all[static_cast<std::size_t>(seed)].score);
    }
}

TEST_CASE("cluster proposals: identical and block structure") {
    std::vector<RegionProposal> ps(4);
    for (int i = 0; i < 4; ++i) {
        ps[i].seed = i;
        ps[i].members = {1, 2, 3};
        ps[i].score = i == 0 ? 0.1 : 0.5;
    }
    auto c = cluster_proposals(ps, 0.4, 1);
    REQUIRE(c.size() == 1);
    CHECK(c[0].representative == 1);

    std::vector<RegionProposal> blocks(6);
    for (int i = 0; i < 6; ++i) {
        blocks[i].seed = 10 + i;
        blocks[i].members = i < 3 ? std::vector<int>{1, 2, 3} : std::vector<int>{7, 8};
        blocks[i].score = static_cast<double>(i % 3);
    }
    c = cluster_proposals(blocks, 0.4, 1);
    REQUIRE(c.size() == 2);
    CHECK(c[0].representative == 2);
    CHECK(c[1].representative == 5);
    CHECK(c[0].rank == 0);
    CHECK(cluster_proposals(blocks, 0.4, 4).empty());
}

TEST_CASE("cluster proposals match the brute-force linkage oracle") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<RegionProposal> ps(12);
        std::vector<std::vector<int>> sets;
        for (int i = 0; i < 12; ++i) {
            const int block = i % 3;
            std::vector<int> s;
            for (int k = 0; k < 10; ++k) {
                if (rng() % 5 != 0) s.push_back(block * 10 + k);
            }
            if (rng() % 3 == 0) s.push_back(static_cast<int>(rng() % 30));
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
            if (s.empty()) s.push_back(block * 10);
            ps[i].seed = i;
            ps[i].members = s;
            ps[i].score = static_cast<double>(rng() % 100);
            sets.push_back(s);
        }
        const double cut = 0.4;
        std::vector<double> d(144);
        for (int i = 0; i < 12; ++i) {
            for (int j = 0; j < 12; ++j) d[i * 12 + j] = jaccard_distance(sets[i], sets[j]);
        }
        const auto expect = partition(oracle::upgma(d, 12, cut));
        const auto clusters = cluster_proposals(ps, cut, 1);
        std::vector<int> labels(12, -1);
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (const auto m : clusters[c].members) labels[m] = static_cast<int>(c);
        }
        CHECK(partition(labels) == expect);
        // Blocks are recovered whenever each proposal kept most of its block.
        for (const auto& part : expect) {
            std::set<int> blocks_seen;
            for (const auto i : part) blocks_seen.insert(static_cast<int>(i) % 3);
            CHECK(blocks_seen.size() == 1);
        }
    }
}

TEST_CASE("average linkage equals the oracle on random matrices") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 9);
        std::vector<double> d(static_cast<std::size_t>(n * n), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = u(rng);
        }
        const double cut = u(rng);
        const std::vector<double> w(static_cast<std::size_t>(n), 1.0);
        CHECK(partition(clustering::average_linkage(d, w, cut)) == partition(oracle::upgma(d, n, cut)));
    }
}

TEST_CASE("proposal dump is one json object per line") {
    RegionProposal p;
    p.seed = 3;
    p.members = {3, 4};
    p.score = 0.25;
    p.trace = {{3, 0.1}, {4, 0.25}};
    std::ostringstream out;
    write_proposals_jsonl(out, std::vector<RegionProposal>{p, p});
    std::istringstream in(out.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("seed") == 3);
        CHECK(j.at("members") == nlohmann::json::array({3, 4}));
        CHECK(j.at("best_score") == 0.25);
        CHECK(j.at("trace_scores").size() == 2);
        ++n;
    }
    CHECK(n == 2);
}
