#include "texmark/boundaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "texmark/error.hpp"
#include "texmark/linkage.hpp"

namespace texmark::boundaries {

std::vector<Segment> proposal_boundary(std::span<const int> members,
                                       const segmentation::AdjacencyGraph& graph) {
    std::vector<int> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Segment> out;
    for (const int i : sorted) {
        for (const int j : graph.neighbors(i)) {
            if (!std::binary_search(sorted.begin(), sorted.end(), j)) out.push_back({i, j});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SegmentVote> vote_boundaries(std::span<const regions::RegionProposal> proposals,
                                         std::span<const TextonHistogram> hists,
                                         const segmentation::AdjacencyGraph& graph) {
    std::map<Segment, SegmentVote> acc;
    for (const auto& p : proposals) {
        for (const Segment& s : proposal_boundary(p.members, graph)) {
            auto& v = acc[s];
            v.segment = s;
            v.vote += stats::chi2_distance(p.histogram, hists[static_cast<std::size_t>(s.exterior)]);
            v.supporters.push_back(p.seed);
        }
    }
    std::vector<SegmentVote> out;
    out.reserve(acc.size());
    for (auto& [seg, v] : acc) {
        std::sort(v.supporters.begin(), v.supporters.end());
        out.push_back(std::move(v));
    }
    return out;
}

double recompute_vote(const SegmentVote& vote, std::span<const regions::RegionProposal> proposals_by_seed,
                      std::span<const TextonHistogram> hists) {
    double sum = 0.0;
    for (const int k : vote.supporters) {
        const auto it = std::find_if(proposals_by_seed.begin(), proposals_by_seed.end(),
                                     [k](const regions::RegionProposal& p) { return p.seed == k; });
        if (it == proposals_by_seed.end()) throw LookupError("supporter has no proposal");
        sum += stats::chi2_distance(it->histogram, hists[static_cast<std::size_t>(vote.segment.exterior)]);
    }
    return sum;
}

double vote_percentile(std::span<const SegmentVote> votes, double q) {
    if (q < 0.0 || q > 1.0) throw ParameterError("percentile must lie in [0, 1]");
    std::vector<double> nonzero;
    for (const auto& v : votes) {
        if (v.vote > 0.0) nonzero.push_back(v.vote);
    }
    if (nonzero.empty()) return 0.0;
    std::sort(nonzero.begin(), nonzero.end());
    const auto idx = std::min(nonzero.size() - 1,
                              static_cast<std::size_t>(std::llround(q * static_cast<double>(nonzero.size()))));
    return nonzero[idx];
}

std::vector<SegmentVote> threshold_segments(std::span<const SegmentVote> votes, double min_vote) {
    if (min_vote < 0.0) throw ParameterError("min_vote must be non-negative");
    std::vector<SegmentVote> out;
    for (const auto& v : votes) {
        if (v.vote >= min_vote) out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> chain_order(std::span<const PointF> points) {
    const std::size_t n = points.size();
    std::vector<std::size_t> order;
    if (n == 0) return order;
    std::vector<char> used(n, 0);
    std::size_t cur = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const auto& a = points[i];
        const auto& b = points[cur];
        if (a.x < b.x || (a.x == b.x && a.y < b.y)) cur = i;
    }
    for (;;) {
        order.push_back(cur);
        used[cur] = 1;
        if (order.size() == n) break;
        std::size_t next = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double dx = points[i].x - points[cur].x;
            const double dy = points[i].y - points[cur].y;
            const double d = dx * dx + dy * dy;
            if (d < best) {
                best = d;
                next = i;
            }
        }
        cur = next;
    }
    return order;
}

std::vector<BoundaryGroup> group_segments(std::span<const SegmentVote> votes,
                                          const segmentation::AdjacencyGraph& graph, double cut_distance) {
    if (votes.empty()) return {};
    std::vector<std::vector<int>> sets;
    sets.reserve(votes.size());
    for (const auto& v : votes) sets.push_back(v.supporters);
    const std::vector<int> labels = clustering::cluster_sets(sets, cut_distance);
    const int n_groups = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_groups));
    for (std::size_t i = 0; i < votes.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    std::vector<BoundaryGroup> groups;
    groups.reserve(members.size());
    for (const auto& idx : members) {
        BoundaryGroup g;
        std::vector<PointF> mids;
        for (const std::size_t i : idx) {
            mids.push_back(graph.midpoint(votes[i].segment.interior, votes[i].segment.exterior));
        }
        for (const std::size_t o : chain_order(mids)) {
            const auto& v = votes[idx[o]];
            g.segments.push_back(v);
            g.polyline.push_back(mids[o]);
            g.total_vote += v.vote;
            g.supporters.insert(g.supporters.end(), v.supporters.begin(), v.supporters.end());
        }
        std::sort(g.supporters.begin(), g.supporters.end());
        g.supporters.erase(std::unique(g.supporters.begin(), g.supporters.end()), g.supporters.end());
        groups.push_back(std::move(g));
    }

    auto min_interior = [](const BoundaryGroup& g) {
        int m = std::numeric_limits<int>::max();
        for (const auto& s : g.segments) m = std::min(m, s.segment.interior);
        return m;
    };
    std::sort(groups.begin(), groups.end(), [&](const BoundaryGroup& a, const BoundaryGroup& b) {
        if (a.total_vote != b.total_vote) return a.total_vote > b.total_vote;
        return min_interior(a) < min_interior(b);
    });
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i].rank = static_cast<int>(i);
    return groups;
}

GrayImage vote_map(std::span<const SegmentVote> votes, const segmentation::AdjacencyGraph& graph, int width,
                   int height) {
    GrayImage img = GrayImage::filled(width, height, 0.0f);
    double top = 0.0;
    for (const auto& v : votes) top = std::max(top, v.vote);
    if (top <= 0.0) return img;
    for (const auto& v : votes) {
        const auto value = static_cast<float>(v.vote / top);
        for (const Pixel& p : graph.border(v.segment.interior, v.segment.exterior)) {
            if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) continue;
            float& dst = img.at(p.x, p.y);
            dst = std::max(dst, value);
        }
    }
    return img;
}

}  // namespace texmark::boundaries
