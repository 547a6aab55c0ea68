#include "texmark/regions.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "texmark/error.hpp"

namespace texmark::regions {

Region make_region(std::vector<int> members, const segmentation::AdjacencyGraph& graph,
                   std::span<const TextonHistogram> hists) {
    if (members.empty()) throw ParameterError("region must contain at least one superpixel");
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    Region r;
    for (const int m : members) {
        for (const int nb : graph.neighbors(m)) {
            if (!std::binary_search(members.begin(), members.end(), nb)) r.frontier.push_back(nb);
        }
    }
    std::sort(r.frontier.begin(), r.frontier.end());
    r.frontier.erase(std::unique(r.frontier.begin(), r.frontier.end()), r.frontier.end());
    r.histogram = stats::region_histogram(members, hists);
    r.members = std::move(members);
    return r;
}

double score_contrast(const Region& region, std::span<const TextonHistogram> hists, double sample_area) {
    if (region.frontier.empty()) throw ParameterError("contrast undefined for an empty frontier");
    double worst = 0.0;
    for (const int j : region.frontier) {
        worst = std::max(worst, stats::chi2_pvalue(region.histogram, hists[static_cast<std::size_t>(j)], sample_area));
    }
    return -worst;
}

double score_coherence(const Region& region, std::span<const TextonHistogram> hists, double sample_area) {
    if (region.members.empty()) throw ParameterError("coherence undefined for an empty region");
    double sum = 0.0;
    for (const int i : region.members) {
        sum += stats::chi2_pvalue(region.histogram, hists[static_cast<std::size_t>(i)], sample_area);
    }
    return sum / static_cast<double>(region.members.size());
}

double score_compactness(const Region& region) {
    if (region.members.empty()) throw ParameterError("compactness undefined for an empty region");
    const auto s = static_cast<double>(region.members.size());
    return static_cast<double>(region.frontier.size()) / (s * s);
}

SignificanceTerms significance_terms(const Region& region, const SignificanceWeights& w,
                                     std::span<const TextonHistogram> hists) {
    SignificanceTerms t;
    t.contrast = score_contrast(region, hists, w.sample_area);
    t.coherence = score_coherence(region, hists, w.sample_area);
    t.compactness = score_compactness(region);
    t.total = w.contrast * t.contrast + w.coherence * t.coherence +
              w.compactness * std::min(t.compactness, w.compactness_clamp);
    return t;
}

double significance(const Region& region, const SignificanceWeights& w,
                    std::span<const TextonHistogram> hists) {
    return significance_terms(region, w, hists).total;
}

RegionProposal grow_region(int seed, const segmentation::AdjacencyGraph& graph,
                           std::span<const TextonHistogram> hists, std::span<const std::int64_t> areas,
                           const GrowthOptions& options) {
    const int n = graph.size();
    if (seed < 0 || seed >= n) throw ParameterError("seed is not a valid superpixel id");
    if (graph.neighbors(seed).empty()) throw ParameterError("seed superpixel has no neighbours");
    if (hists.size() != static_cast<std::size_t>(n) || areas.size() != static_cast<std::size_t>(n)) {
        throw ParameterError("histogram/area tables do not match the graph");
    }

    std::int64_t total_area = 0;
    for (const auto a : areas) total_area += a;
    const double cap = options.max_area_fraction * static_cast<double>(total_area);

    std::vector<char> state(static_cast<std::size_t>(n), 0);  // 1 = member, 2 = frontier
    Region region;
    region.members = {seed};
    region.histogram = hists[static_cast<std::size_t>(seed)];
    state[static_cast<std::size_t>(seed)] = 1;
    for (const int nb : graph.neighbors(seed)) {
        state[static_cast<std::size_t>(nb)] = 2;
        region.frontier.push_back(nb);
    }
    std::int64_t area = areas[static_cast<std::size_t>(seed)];

    RegionProposal proposal;
    proposal.seed = seed;
    int added = seed;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> order{seed};
    for (;;) {
        if (region.frontier.empty()) break;
        std::sort(region.frontier.begin(), region.frontier.end());
        const double f = significance(region, options.weights, hists);
        proposal.trace.push_back({added, f});
        if (f > best) {
            best = f;
            proposal.best_iteration = proposal.trace.size() - 1;
        }
        if (static_cast<double>(area) >= cap) break;

        int pick = -1;
        double pick_d = std::numeric_limits<double>::infinity();
        for (const int j : region.frontier) {
            const double d = stats::chi2_distance(region.histogram, hists[static_cast<std::size_t>(j)]);
            if (d < pick_d) {
                pick_d = d;
                pick = j;
            }
        }
        added = pick;
        order.push_back(pick);
        state[static_cast<std::size_t>(pick)] = 1;
        region.members.insert(std::upper_bound(region.members.begin(), region.members.end(), pick), pick);
        region.histogram.add(hists[static_cast<std::size_t>(pick)]);
        area += areas[static_cast<std::size_t>(pick)];
        region.frontier.erase(std::find(region.frontier.begin(), region.frontier.end(), pick));
        for (const int nb : graph.neighbors(pick)) {
            if (state[static_cast<std::size_t>(nb)] == 0) {
                state[static_cast<std::size_t>(nb)] = 2;
                region.frontier.push_back(nb);
            }
        }
    }

    proposal.score = best;
    proposal.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(proposal.best_iteration + 1));
    std::sort(proposal.members.begin(), proposal.members.end());
    proposal.histogram = stats::region_histogram(proposal.members, hists);
    return proposal;
}

std::vector<RegionProposal> grow_all(const segmentation::AdjacencyGraph& graph,
                                     std::span<const TextonHistogram> hists,
                                     std::span<const std::int64_t> areas, const GrowthOptions& options) {
    const int n = graph.size();
    std::vector<RegionProposal> slots(static_cast<std::size_t>(n));
    std::vector<char> valid(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(dynamic, 4)
    for (int seed = 0; seed < n; ++seed) {
        if (graph.neighbors(seed).empty()) continue;
        slots[static_cast<std::size_t>(seed)] = grow_region(seed, graph, hists, areas, options);
        valid[static_cast<std::size_t>(seed)] = 1;
    }
    std::vector<RegionProposal> out;
    out.reserve(slots.size());
    for (int seed = 0; seed < n; ++seed) {
        if (valid[static_cast<std::size_t>(seed)]) out.push_back(std::move(slots[static_cast<std::size_t>(seed)]));
    }
    return out;
}

std::vector<ProposalCluster> cluster_proposals(std::span<const RegionProposal> proposals,
                                               double cut_distance, std::size_t min_cluster_size) {
    if (proposals.empty()) return {};
    std::vector<std::vector<int>> sets;
    sets.reserve(proposals.size());
    for (const auto& p : proposals) sets.push_back(p.members);
    const std::vector<int> labels = clustering::cluster_sets(sets, cut_distance);

    const int n_clusters = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<ProposalCluster> clusters(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        clusters[static_cast<std::size_t>(labels[i])].members.push_back(i);
    }

    std::vector<ProposalCluster> kept;
    for (auto& c : clusters) {
        if (c.members.size() < min_cluster_size) continue;
        std::size_t rep = c.members.front();
        for (const std::size_t m : c.members) {
            const auto& p = proposals[m];
            const auto& r = proposals[rep];
            if (p.score > r.score || (p.score == r.score && p.seed < r.seed)) rep = m;
        }
        c.representative = rep;
        kept.push_back(std::move(c));
    }
    std::sort(kept.begin(), kept.end(), [&](const ProposalCluster& a, const ProposalCluster& b) {
        const auto& pa = proposals[a.representative];
        const auto& pb = proposals[b.representative];
        if (pa.score != pb.score) return pa.score > pb.score;
        return pa.seed < pb.seed;
    });
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].rank = static_cast<int>(i);
    return kept;
}

void write_proposals_jsonl(std::ostream& out, std::span<const RegionProposal> proposals) {
    for (const auto& p : proposals) {
        std::vector<double> scores;
        scores.reserve(p.trace.size());
        for (const auto& s : p.trace) scores.push_back(s.score);
        const nlohmann::json j{{"seed", p.seed},
                               {"members", p.members},
                               {"best_score", p.score},
                               {"trace_scores", scores}};
        out << j.dump() << '\n';
    }
}

}  // namespace texmark::regions
