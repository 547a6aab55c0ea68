#include "texmark/linkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "texmark/error.hpp"

namespace texmark::clustering {

double jaccard_distance(std::span<const int> a, std::span<const int> b) {
    if (a.empty() || b.empty()) throw ParameterError("jaccard_distance of an empty set");
    std::size_t i = 0, j = 0, inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> average_linkage(std::span<const double> distances, std::span<const double> weights,
                                 double cut) {
    const std::size_t n = weights.size();
    if (distances.size() != n * n) throw ParameterError("distance matrix must be n x n");
    std::vector<double> d(distances.begin(), distances.end());
    std::vector<double> w(weights.begin(), weights.end());
    std::vector<char> active(n, 1);
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> nn(n, n);
    std::vector<double> nnd(n, kInf);
    auto rescan = [&](std::size_t i) {
        nn[i] = n;
        nnd[i] = kInf;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i || !active[k]) continue;
            if (d[i * n + k] < nnd[i]) {
                nnd[i] = d[i * n + k];
                nn[i] = k;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) rescan(i);

    for (std::size_t remaining = n; remaining > 1; --remaining) {
        std::size_t a = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i] && nn[i] < n && (a == n || nnd[i] < nnd[a])) a = i;
        }
        if (a == n || nnd[a] > cut) break;
        const std::size_t b = nn[a];
        const std::size_t keep = std::min(a, b);
        const std::size_t drop = std::max(a, b);

        const double wk = w[keep], wd = w[drop];
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == keep || k == drop) continue;
            const double merged = (wk * d[keep * n + k] + wd * d[drop * n + k]) / (wk + wd);
            d[keep * n + k] = merged;
            d[k * n + keep] = merged;
        }
        w[keep] = wk + wd;
        active[drop] = 0;
        parent[drop] = keep;

        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k]) continue;
            if (k == keep || nn[k] == keep || nn[k] == drop) {
                rescan(k);
            } else {
                const double dk = d[k * n + keep];
                if (dk < nnd[k] || (dk == nnd[k] && keep < nn[k])) {
                    nnd[k] = dk;
                    nn[k] = keep;
                }
            }
        }
    }

    std::vector<int> labels(n, -1);
    std::vector<int> root_label(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = i;
        while (parent[r] != r) r = parent[r];
        if (root_label[r] < 0) root_label[r] = next++;
        labels[i] = root_label[r];
    }
    return labels;
}

std::vector<int> cluster_sets(const std::vector<std::vector<int>>& sets, double cut) {
    // Identical sets sit at distance 0 and merge first under any tie order,
    // so collapsing them up front leaves the flat clustering unchanged.
    std::map<std::vector<int>, std::size_t> unique_index;
    std::vector<const std::vector<int>*> uniques;
    std::vector<double> weights;
    std::vector<std::size_t> item_to_unique(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        auto [it, inserted] = unique_index.try_emplace(sets[i], uniques.size());
        if (inserted) {
            uniques.push_back(&sets[i]);
            weights.push_back(0.0);
        }
        weights[it->second] += 1.0;
        item_to_unique[i] = it->second;
    }

    const std::size_t u = uniques.size();
    std::vector<double> dist(u * u, 0.0);
    for (std::size_t a = 0; a < u; ++a) {
        for (std::size_t b = a + 1; b < u; ++b) {
            const double dd = jaccard_distance(*uniques[a], *uniques[b]);
            dist[a * u + b] = dd;
            dist[b * u + a] = dd;
        }
    }
    const std::vector<int> unique_labels = average_linkage(dist, weights, cut);

    // Renumber by first appearance over the original item order.
    std::vector<int> remap(u, -1);
    std::vector<int> labels(sets.size());
    int next = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const int ul = unique_labels[item_to_unique[i]];
        if (remap[static_cast<std::size_t>(ul)] < 0) remap[static_cast<std::size_t>(ul)] = next++;
        labels[i] = remap[static_cast<std::size_t>(ul)];
    }
    return labels;
}

}  // namespace texmark::clustering
