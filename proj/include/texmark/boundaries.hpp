#pragma once

#include <span>
#include <vector>

#include "texmark/image.hpp"
#include "texmark/regions.hpp"
#include "texmark/segmentation.hpp"
#include "texmark/stats.hpp"

namespace texmark::boundaries {

using segmentation::Segment;
using stats::TextonHistogram;

/// delta S: every (i, j) with i in S and j a neighbour of i outside S, sorted.
std::vector<Segment> proposal_boundary(std::span<const int> members,
                                       const segmentation::AdjacencyGraph& graph);

struct SegmentVote {
    Segment segment;
    std::vector<int> supporters;  // seed ids, ascending
    double vote = 0.0;
};

/// Each proposal k adds chi2(h_{S_k}, h_j) to every (i, j) on its boundary.
/// Accumulation runs in proposal order. Output sorted by segment.
std::vector<SegmentVote> vote_boundaries(std::span<const regions::RegionProposal> proposals,
                                         std::span<const TextonHistogram> hists,
                                         const segmentation::AdjacencyGraph& graph);

/// Sum of chi2(h_{S_k}, h_j) over the stored supporters, recomputed from scratch.
double recompute_vote(const SegmentVote& vote, std::span<const regions::RegionProposal> proposals_by_seed,
                      std::span<const TextonHistogram> hists);

/// Value v such that keeping votes >= v retains the top (1 - q) share of
/// the nonzero votes (v = sorted[round(q * n)]). Returns 0 for no votes.
double vote_percentile(std::span<const SegmentVote> votes, double q);

std::vector<SegmentVote> threshold_segments(std::span<const SegmentVote> votes, double min_vote);

struct BoundaryGroup {
    std::vector<SegmentVote> segments;  // in polyline order
    std::vector<PointF> polyline;       // segment midpoints
    std::vector<int> supporters;        // union Q_B, ascending
    double total_vote = 0.0;
    int rank = 0;
};

/// Greedy nearest-neighbour chaining starting from the lexicographically
/// smallest point (x, then y). Returns the visiting order.
std::vector<std::size_t> chain_order(std::span<const PointF> points);

/// Average-linkage clustering of segments under Jaccard distance between
/// supporter sets, cut at `cut_distance`. Groups ranked by total vote
/// (descending), ties by the smallest interior id.
std::vector<BoundaryGroup> group_segments(std::span<const SegmentVote> votes,
                                          const segmentation::AdjacencyGraph& graph, double cut_distance);

/// Border pixels shaded by the largest vote of any segment they belong to,
/// scaled so the strongest vote is white.
GrayImage vote_map(std::span<const SegmentVote> votes, const segmentation::AdjacencyGraph& graph, int width,
                   int height);

}  // namespace texmark::boundaries
