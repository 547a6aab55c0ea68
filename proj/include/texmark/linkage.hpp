#pragma once

#include <span>
#include <vector>

namespace texmark::clustering {

/// 1 - |A n B| / |A u B| for sorted, duplicate-free id lists.
/// Throws ParameterError if either set is empty.
double jaccard_distance(std::span<const int> a, std::span<const int> b);

/// Average-linkage (UPGMA) agglomeration over `n` items with a full
/// row-major distance matrix. `weights` are item multiplicities (an item
/// standing for w identical originals). Merging continues while the closest
/// pair is at distance <= cut; ties go to the lexicographically smallest
/// pair. Returns a cluster label per item, numbered by first appearance.
std::vector<int> average_linkage(std::span<const double> distances, std::span<const double> weights,
                                 double cut);

/// Convenience: clusters sorted id sets, collapsing identical sets first.
std::vector<int> cluster_sets(const std::vector<std::vector<int>>& sets, double cut);

}  // namespace texmark::clustering
