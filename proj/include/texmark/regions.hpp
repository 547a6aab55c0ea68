#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "texmark/linkage.hpp"
#include "texmark/segmentation.hpp"
#include "texmark/stats.hpp"

namespace texmark::regions {

using clustering::jaccard_distance;
using stats::TextonHistogram;

struct SignificanceWeights {
    double contrast = 1.0;
    double coherence = 0.5;
    double compactness = 0.25;
    /// Upper clamp applied to the compactness term inside the weighted sum.
    double compactness_clamp = 1.0;
    /// Pixels per independent observation in the p-value tests.
    double sample_area = 1.0;
};

/// A connected superpixel set S with its frontier T(S) and summed histogram.
struct Region {
    std::vector<int> members;   // sorted
    std::vector<int> frontier;  // sorted; neighbours of S outside S
    TextonHistogram histogram;
};

Region make_region(std::vector<int> members, const segmentation::AdjacencyGraph& graph,
                   std::span<const TextonHistogram> hists);

/// -max_{j in T(S)} pval(h_S, h_j). Throws ParameterError for an empty frontier.
double score_contrast(const Region& region, std::span<const TextonHistogram> hists, double sample_area = 1.0);
/// Mean over members (ascending id order) of pval(h_S, h_i).
double score_coherence(const Region& region, std::span<const TextonHistogram> hists, double sample_area = 1.0);
/// |T(S)| / |S|^2, unclamped.
double score_compactness(const Region& region);

struct SignificanceTerms {
    double contrast = 0.0;
    double coherence = 0.0;
    double compactness = 0.0;
    double total = 0.0;
};

SignificanceTerms significance_terms(const Region& region, const SignificanceWeights& w,
                                     std::span<const TextonHistogram> hists);
double significance(const Region& region, const SignificanceWeights& w,
                    std::span<const TextonHistogram> hists);

struct GrowthOptions {
    /// Growth stops once the region covers this fraction of foreground area.
    double max_area_fraction = 0.10;
    SignificanceWeights weights;
};

struct GrowthStep {
    int added = 0;
    double score = 0.0;
};

struct RegionProposal {
    int seed = 0;
    std::vector<GrowthStep> trace;
    std::vector<int> members;  // best-scoring prefix, sorted
    std::size_t best_iteration = 0;
    double score = 0.0;
    TextonHistogram histogram;
};

/// Greedy growth from {seed}: repeatedly adds the frontier superpixel with
/// the smallest chi2 distance to the current region histogram (lowest id on
/// ties), scoring F(S) at every step, until the area cap is reached or the
/// frontier empties. Returns the best-scoring prefix (earliest on ties).
/// Throws ParameterError for an out-of-range or isolated seed.
RegionProposal grow_region(int seed, const segmentation::AdjacencyGraph& graph,
                           std::span<const TextonHistogram> hists, std::span<const std::int64_t> areas,
                           const GrowthOptions& options);

/// One proposal per non-isolated superpixel, in seed order.
std::vector<RegionProposal> grow_all(const segmentation::AdjacencyGraph& graph,
                                     std::span<const TextonHistogram> hists,
                                     std::span<const std::int64_t> areas, const GrowthOptions& options);

struct ProposalCluster {
    std::vector<std::size_t> members;  // indices into the proposal list
    std::size_t representative = 0;
    int rank = 0;
};

/// Average-linkage clustering of proposal member sets under Jaccard
/// distance, cut at `cut_distance`; clusters smaller than
/// `min_cluster_size` are dropped. Ranked by representative score.
std::vector<ProposalCluster> cluster_proposals(std::span<const RegionProposal> proposals,
                                               double cut_distance, std::size_t min_cluster_size);

/// Diagnostic dump: one JSON object per line.
void write_proposals_jsonl(std::ostream& out, std::span<const RegionProposal> proposals);

}  // namespace texmark::regions
