#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "texmark/segmentation.hpp"
#include "texmark/texture.hpp"

namespace texmark::stats {

/// Raw texton counts. `total` is kept equal to the sum of `counts`.
struct TextonHistogram {
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    TextonHistogram() = default;
    explicit TextonHistogram(std::vector<std::int64_t> c);
    static TextonHistogram zeros(int bins);

    int size() const { return static_cast<int>(counts.size()); }
    void add(const TextonHistogram& other);
    void subtract(const TextonHistogram& other);

    friend bool operator==(const TextonHistogram&, const TextonHistogram&) = default;
};

/// h_i[k] = number of pixels of superpixel i carrying texton k.
std::vector<TextonHistogram> superpixel_histograms(const texture::TextonMap& tmap,
                                                   const segmentation::SuperpixelMap& spmap);

/// Element-wise sum over the member superpixels. Throws ParameterError on
/// an empty member set.
TextonHistogram region_histogram(std::span<const int> members,
                                 std::span<const TextonHistogram> hists);

/// 1/2 sum (p_k - q_k)^2 / (p_k + q_k) on normalized histograms; bins empty in
/// both are skipped. Throws ParameterError when either total is zero.
double chi2_distance(std::span<const std::int64_t> p, std::span<const std::int64_t> q);
double chi2_distance(const TextonHistogram& p, const TextonHistogram& q);

/// Upper tail P[X >= statistic] of a chi-squared variable with integer `dof`.
/// Closed-form finite series (erfc term for odd dof).
double chi2_upper_tail(double statistic, int dof);

struct IndependenceTest {
    double statistic = 0.0;
    int dof = 0;
    double pvalue = 1.0;
};

/// Pearson test of independence on the 2 x K table with rows p and q.
/// Columns with zero sum are dropped; fewer than two remaining columns
/// yield statistic 0 and p-value 1. Texton labels of neighbouring pixels are
/// correlated; `sample_area` pixels count as one observation, which divides
/// the statistic by that factor (1 is the plain test).
IndependenceTest chi2_independence(std::span<const std::int64_t> p, std::span<const std::int64_t> q,
                                   double sample_area = 1.0);
double chi2_pvalue(const TextonHistogram& p, const TextonHistogram& q, double sample_area = 1.0);

}  // namespace texmark::stats
