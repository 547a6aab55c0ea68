#include "texmark/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "texmark/error.hpp"

namespace texmark::stats {

TextonHistogram::TextonHistogram(std::vector<std::int64_t> c)
    : counts(std::move(c)), total(std::accumulate(counts.begin(), counts.end(), std::int64_t{0})) {}

TextonHistogram TextonHistogram::zeros(int bins) {
    return TextonHistogram(std::vector<std::int64_t>(static_cast<std::size_t>(bins), 0));
}

void TextonHistogram::add(const TextonHistogram& other) {
    if (other.counts.size() != counts.size()) throw ParameterError("histogram length mismatch");
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
    total += other.total;
}

void TextonHistogram::subtract(const TextonHistogram& other) {
    if (other.counts.size() != counts.size()) throw ParameterError("histogram length mismatch");
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] -= other.counts[k];
    total -= other.total;
}

std::vector<TextonHistogram> superpixel_histograms(const texture::TextonMap& tmap,
                                                   const segmentation::SuperpixelMap& spmap) {
    if (tmap.width != spmap.width || tmap.height != spmap.height) {
        throw ParameterError("texton map and superpixel map dimensions differ");
    }
    std::vector<TextonHistogram> hists(static_cast<std::size_t>(spmap.n_superpixels),
                                       TextonHistogram::zeros(tmap.n_textons));
    for (std::size_t p = 0; p < spmap.labels.size(); ++p) {
        const auto sp = spmap.labels[p];
        const auto t = tmap.labels[p];
        if (sp < 0 || t < 0) continue;
        auto& h = hists[static_cast<std::size_t>(sp)];
        ++h.counts[static_cast<std::size_t>(t)];
        ++h.total;
    }
    return hists;
}

TextonHistogram region_histogram(std::span<const int> members, std::span<const TextonHistogram> hists) {
    if (members.empty()) throw ParameterError("region must contain at least one superpixel");
    TextonHistogram sum = TextonHistogram::zeros(hists[static_cast<std::size_t>(members.front())].size());
    for (const int m : members) sum.add(hists[static_cast<std::size_t>(m)]);
    return sum;
}

double chi2_distance(std::span<const std::int64_t> p, std::span<const std::int64_t> q) {
    if (p.size() != q.size()) throw ParameterError("histogram length mismatch");
    const auto np = std::accumulate(p.begin(), p.end(), std::int64_t{0});
    const auto nq = std::accumulate(q.begin(), q.end(), std::int64_t{0});
    if (np <= 0 || nq <= 0) throw ParameterError("chi2_distance needs non-empty histograms");
    const double ip = 1.0 / static_cast<double>(np);
    const double iq = 1.0 / static_cast<double>(nq);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double a = static_cast<double>(p[k]) * ip;
        const double b = static_cast<double>(q[k]) * iq;
        const double s = a + b;
        if (s > 0.0) acc += (a - b) * (a - b) / s;
    }
    return 0.5 * acc;
}

double chi2_distance(const TextonHistogram& p, const TextonHistogram& q) {
    return chi2_distance(std::span<const std::int64_t>(p.counts), std::span<const std::int64_t>(q.counts));
}

double chi2_upper_tail(double statistic, int dof) {
    if (dof < 1) throw ParameterError("chi-squared dof must be >= 1");
    if (!(statistic > 0.0)) return 1.0;
    if (std::isinf(statistic)) return 0.0;
    const double y = 0.5 * statistic;

    // Q(m, y) = e^-y sum_{i<m} y^i / i!  for integer m = dof / 2; the odd case
    // adds erfc(sqrt y) and the half-integer terms y^(i-1/2) / Gamma(i+1/2).
    const bool odd = (dof % 2) == 1;
    const int terms = odd ? (dof - 1) / 2 : dof / 2;
    double sum = 0.0;
    if (y < 600.0) {
        const double ey = std::exp(-y);
        if (odd) {
            double term = std::sqrt(y) * 2.0 / std::sqrt(std::numbers::pi);  // y^(1/2) / Gamma(3/2)
            for (int i = 1; i <= terms; ++i) {
                sum += term;
                term *= y / (i + 0.5);
            }
            return std::min(1.0, std::erfc(std::sqrt(y)) + ey * sum);
        }
        double term = 1.0;
        for (int i = 0; i < terms; ++i) {
            sum += term;
            term *= y / (i + 1);
        }
        return std::min(1.0, ey * sum);
    }
    const double ly = std::log(y);
    if (odd) {
        for (int i = 1; i <= terms; ++i) sum += std::exp((i - 0.5) * ly - y - std::lgamma(i + 0.5));
        return std::min(1.0, std::erfc(std::sqrt(y)) + sum);
    }
    for (int i = 0; i < terms; ++i) sum += std::exp(i * ly - y - std::lgamma(i + 1.0));
    return std::min(1.0, sum);
}

IndependenceTest chi2_independence(std::span<const std::int64_t> p, std::span<const std::int64_t> q,
                                   double sample_area) {
    if (p.size() != q.size()) throw ParameterError("histogram length mismatch");
    if (!(sample_area > 0.0)) throw ParameterError("sample_area must be positive");
    double np = 0.0, nq = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        np += static_cast<double>(p[k]);
        nq += static_cast<double>(q[k]);
    }
    if (np <= 0.0 || nq <= 0.0) throw ParameterError("chi2_pvalue needs non-empty histograms");
    const double n = np + nq;
    const double fp = np / n;
    const double fq = nq / n;

    IndependenceTest t;
    int columns = 0;
    double stat = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double a = static_cast<double>(p[k]);
        const double b = static_cast<double>(q[k]);
        const double col = a + b;
        if (col <= 0.0) continue;
        ++columns;
        const double ea = col * fp;
        const double eb = col * fq;
        stat += (a - ea) * (a - ea) / ea + (b - eb) * (b - eb) / eb;
    }
    if (columns < 2) return t;
    t.statistic = stat / sample_area;
    t.dof = columns - 1;
    t.pvalue = chi2_upper_tail(t.statistic, t.dof);
    return t;
}

double chi2_pvalue(const TextonHistogram& p, const TextonHistogram& q, double sample_area) {
    return chi2_independence(p.counts, q.counts, sample_area).pvalue;
}

}  // namespace texmark::stats
