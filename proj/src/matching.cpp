#include "texmark/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "texmark/error.hpp"
#include "texmark/linkage.hpp"

namespace texmark::matching {

std::string to_string(LandmarkKind kind) { return kind == LandmarkKind::Closed ? "closed" : "open"; }

LandmarkKind landmark_kind_from_string(const std::string& s) {
    if (s == "closed") return LandmarkKind::Closed;
    if (s == "open") return LandmarkKind::Open;
    throw InputError("unknown landmark kind '" + s + "'");
}

PointF mean_point(std::span<const PointF> points) {
    PointF m;
    if (points.empty()) return m;
    for (const auto& p : points) {
        m.x += p.x;
        m.y += p.y;
    }
    m.x /= static_cast<double>(points.size());
    m.y /= static_cast<double>(points.size());
    return m;
}

Landmark closed_landmark(const regions::RegionProposal& proposal, const segmentation::AdjacencyGraph& graph,
                         std::span<const TextonHistogram> hists) {
    const auto segs = boundaries::proposal_boundary(proposal.members, graph);
    std::vector<PointF> mids;
    mids.reserve(segs.size());
    for (const auto& s : segs) mids.push_back(graph.midpoint(s.interior, s.exterior));

    Landmark l;
    l.kind = LandmarkKind::Closed;
    l.score = proposal.score;
    for (const std::size_t o : boundaries::chain_order(mids)) {
        l.segments.push_back(segs[o]);
        l.midpoints.push_back(mids[o]);
        l.exterior.push_back(hists[static_cast<std::size_t>(segs[o].exterior)]);
    }
    l.interior = proposal.histogram;
    l.centroid = mean_point(l.midpoints);
    l.members = proposal.members;
    return l;
}

Landmark open_landmark(const boundaries::BoundaryGroup& group, std::span<const TextonHistogram> hists) {
    Landmark l;
    l.kind = LandmarkKind::Open;
    l.score = group.total_vote;
    for (const auto& v : group.segments) {
        l.segments.push_back(v.segment);
        l.exterior.push_back(hists[static_cast<std::size_t>(v.segment.exterior)]);
    }
    l.midpoints = group.polyline;
    l.interior = stats::region_histogram(group.supporters, hists);
    l.centroid = mean_point(l.midpoints);
    l.members = group.supporters;
    return l;
}

namespace {

double segment_jaccard_similarity(std::vector<Segment> a, std::vector<Segment> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<Segment> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    const std::size_t uni = a.size() + b.size() - common.size();
    return uni == 0 ? 0.0 : static_cast<double>(common.size()) / static_cast<double>(uni);
}

}  // namespace

std::vector<Landmark> unify_landmarks(std::vector<Landmark> closed, std::vector<Landmark> open,
                                      double coincide_threshold) {
    std::vector<Landmark> out;
    out.reserve(closed.size() + open.size());
    int rank = 0;
    for (auto& c : closed) {
        c.kind = LandmarkKind::Closed;
        c.rank = rank++;
        out.push_back(std::move(c));
    }
    const std::size_t n_closed = out.size();
    rank = 0;
    for (auto& o : open) {
        bool coincides = false;
        for (std::size_t k = 0; k < n_closed && !coincides; ++k) {
            coincides = segment_jaccard_similarity(o.segments, out[k].segments) > coincide_threshold;
        }
        if (coincides) continue;
        o.kind = LandmarkKind::Open;
        o.rank = rank++;
        out.push_back(std::move(o));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    return out;
}

std::vector<std::vector<std::int64_t>> shape_context(std::span<const PointF> points,
                                                     const ShapeContextParams& params) {
    const std::size_t n = points.size();
    if (n < 2) throw ParameterError("shape context needs at least two points");
    if (params.n_r < 1 || params.n_theta < 1 || !(params.r_inner > 0.0) || !(params.r_outer > params.r_inner)) {
        throw ParameterError("invalid shape context binning");
    }

    double mean_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            mean_d += std::hypot(points[j].x - points[i].x, points[j].y - points[i].y);
        }
    }
    mean_d /= static_cast<double>(n * (n - 1) / 2);

    double reference = 0.0;
    if (params.tangent_normalize) {
        double c = 0.0, s = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double dx = points[i + 1].x - points[i].x;
            const double dy = points[i + 1].y - points[i].y;
            const double len = std::hypot(dx, dy);
            if (len == 0.0) continue;
            const double phi = std::atan2(dy, dx);
            c += len * std::cos(2.0 * phi);
            s += len * std::sin(2.0 * phi);
        }
        reference = 0.5 * std::atan2(s, c);
    }

    const double log_in = std::log(params.r_inner);
    const double log_span = std::log(params.r_outer) - log_in;
    const double two_pi = 2.0 * std::numbers::pi;
    const double sector = two_pi / params.n_theta;

    std::vector<std::vector<std::int64_t>> out(n, std::vector<std::int64_t>(
                                                      static_cast<std::size_t>(params.n_r * params.n_theta), 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = points[j].x - points[i].x;
            const double dy = points[j].y - points[i].y;
            const double d = std::hypot(dx, dy);
            int ring = 0;
            if (d > 0.0 && mean_d > 0.0) {
                const double t = (std::log(d / mean_d) - log_in) / log_span * params.n_r;
                ring = static_cast<int>(std::clamp(std::floor(t), 0.0, static_cast<double>(params.n_r - 1)));
            }
            double theta = std::atan2(dy, dx) - reference;
            theta = std::fmod(theta, two_pi);
            if (theta < 0.0) theta += two_pi;
            const int wedge = std::min(params.n_theta - 1, static_cast<int>(std::floor(theta / sector)));
            ++out[i][static_cast<std::size_t>(ring * params.n_theta + wedge)];
        }
    }
    return out;
}

Assignment hungarian(std::span<const double> cost, int n, int m) {
    if (n <= 0 || m <= 0) throw ParameterError("hungarian on an empty matrix");
    if (cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(m)) {
        throw ParameterError("cost matrix size does not match n x m");
    }
    double scale = 1.0;
    for (const double c : cost) {
        if (!std::isfinite(c)) throw ParameterError("hungarian requires finite costs");
        scale = std::max(scale, std::abs(c));
    }

    // Square padding with zero-cost dummy rows/columns.
    const int N = std::max(n, m);
    auto a = [&](int i, int j) -> double {
        return (i < n && j < m) ? cost[static_cast<std::size_t>(i) * m + j] : 0.0;
    };

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0), minv(N + 1);
    std::vector<int> p(N + 1, 0), way(N + 1, 0);
    std::vector<char> used(N + 1);
    for (int i = 1; i <= N; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= N; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= N; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_of(N), col_of(N);
    for (int j = 1; j <= N; ++j) {
        row_of[j - 1] = p[j] - 1;
        col_of[p[j] - 1] = j - 1;
    }

    // Every optimal assignment lives on the tight edges of the optimal duals;
    // walk rows in order and move each to its smallest feasible tight column.
    const double eps = 1e-9 * scale;
    std::vector<std::vector<int>> tight(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (a(i, j) - u[i + 1] - v[j + 1] <= eps) tight[static_cast<std::size_t>(i)].push_back(j);
        }
    }

    std::vector<char> visited(N);
    // Alternating path from free row r to free column target, rows > fixed only.
    auto augment = [&](auto&& self, int r, int target, int fixed, int banned) -> bool {
        for (const int c : tight[static_cast<std::size_t>(r)]) {
            if (c == banned || visited[c]) continue;
            const int holder = row_of[c];
            if (c != target && (holder <= fixed)) continue;
            visited[c] = 1;
            if (c == target || self(self, holder, target, fixed, banned)) {
                row_of[c] = r;
                col_of[r] = c;
                return true;
            }
        }
        return false;
    };

    for (int i = 0; i < N; ++i) {
        for (const int j : tight[static_cast<std::size_t>(i)]) {
            const int j0 = col_of[i];
            if (j >= j0) break;
            const int r = row_of[j];
            if (r < i) continue;
            std::fill(visited.begin(), visited.end(), 0);
            // Tentatively give j to i; r must reach the freed column j0.
            row_of[j] = i;
            col_of[i] = j;
            row_of[j0] = -1;
            if (augment(augment, r, j0, i, j)) break;
            row_of[j] = r;
            col_of[r] = j;
            row_of[j0] = i;
            col_of[i] = j0;
        }
    }

    Assignment out;
    for (int i = 0; i < n; ++i) {
        const int j = col_of[i];
        if (j < m) {
            out.pairs.emplace_back(i, j);
            out.cost += a(i, j);
        }
    }
    return out;
}

void to_json(nlohmann::json& j, const MatchWeights& w) {
    j = nlohmann::json{{"w_int", w.w_int},
                       {"w_shape", w.w_shape},
                       {"w_ext", w.w_ext},
                       {"w_loc", w.w_loc},
                       {"tolerance_px", w.tolerance_px},
                       {"normalized_exterior", w.normalized_exterior},
                       {"max_points", w.max_points},
                       {"shape",
                        {{"n_r", w.shape.n_r},
                         {"n_theta", w.shape.n_theta},
                         {"r_inner", w.shape.r_inner},
                         {"r_outer", w.shape.r_outer},
                         {"tangent_normalize", w.shape.tangent_normalize}}}};
}

void from_json(const nlohmann::json& j, MatchWeights& w) {
    const MatchWeights d;
    w.w_int = j.value("w_int", d.w_int);
    w.w_shape = j.value("w_shape", d.w_shape);
    w.w_ext = j.value("w_ext", d.w_ext);
    w.w_loc = j.value("w_loc", d.w_loc);
    w.tolerance_px = j.value("tolerance_px", d.tolerance_px);
    w.normalized_exterior = j.value("normalized_exterior", d.normalized_exterior);
    w.max_points = j.value("max_points", d.max_points);
    if (j.contains("shape")) {
        const auto& s = j.at("shape");
        w.shape.n_r = s.value("n_r", d.shape.n_r);
        w.shape.n_theta = s.value("n_theta", d.shape.n_theta);
        w.shape.r_inner = s.value("r_inner", d.shape.r_inner);
        w.shape.r_outer = s.value("r_outer", d.shape.r_outer);
        w.shape.tangent_normalize = s.value("tangent_normalize", d.shape.tangent_normalize);
    }
}

std::vector<std::size_t> subsample_indices(std::size_t n, int max_points) {
    std::vector<std::size_t> idx;
    if (max_points <= 0 || n <= static_cast<std::size_t>(max_points)) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    const auto k = static_cast<std::size_t>(max_points);
    idx.reserve(k);
    for (std::size_t i = 0; i < k; ++i) idx.push_back(i * n / k);
    return idx;
}

double d_interior(const Landmark& a, const Landmark& b) { return stats::chi2_distance(a.interior, b.interior); }

ShapeDistance d_shape(const Landmark& a, const Landmark& b, const MatchWeights& w) {
    const auto ia = subsample_indices(a.midpoints.size(), w.max_points);
    const auto ib = subsample_indices(b.midpoints.size(), w.max_points);
    std::vector<PointF> pa, pb;
    for (const auto i : ia) pa.push_back(a.midpoints[i]);
    for (const auto i : ib) pb.push_back(b.midpoints[i]);
    const auto sa = shape_context(pa, w.shape);
    const auto sb = shape_context(pb, w.shape);

    const int n = static_cast<int>(sa.size());
    const int m = static_cast<int>(sb.size());
    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            cost[static_cast<std::size_t>(i) * m + j] = stats::chi2_distance(sa[i], sb[j]);
        }
    }
    const Assignment as = hungarian(cost, n, m);
    ShapeDistance out;
    out.cost = as.cost / static_cast<double>(as.pairs.size());
    for (const auto& [i, j] : as.pairs) {
        out.correspondence.emplace_back(static_cast<int>(ia[static_cast<std::size_t>(i)]),
                                        static_cast<int>(ib[static_cast<std::size_t>(j)]));
    }
    return out;
}

double d_exterior(const Landmark& a, const Landmark& b, std::span<const std::pair<int, int>> correspondence,
                  bool normalized) {
    double sum = 0.0;
    for (const auto& [i, j] : correspondence) {
        sum += stats::chi2_distance(a.exterior[static_cast<std::size_t>(i)], b.exterior[static_cast<std::size_t>(j)]);
    }
    if (normalized && !correspondence.empty()) sum /= static_cast<double>(correspondence.size());
    return sum;
}

double d_location(const Landmark& a, const Landmark& b, double tolerance_px) {
    const double d = std::hypot(a.centroid.x - b.centroid.x, a.centroid.y - b.centroid.y);
    return std::max(0.0, d - tolerance_px);
}

double weighted_total(const LandmarkMatch& m, const MatchWeights& w) {
    return w.w_int * m.d_int + w.w_shape * m.d_shape + w.w_ext * m.d_ext + w.w_loc * m.d_loc;
}

LandmarkMatch landmark_distance(const Landmark& a, const Landmark& b, const MatchWeights& w) {
    LandmarkMatch m;
    m.a = a.id;
    m.b = b.id;
    ShapeDistance sd = d_shape(a, b, w);
    m.d_shape = sd.cost;
    m.correspondence = std::move(sd.correspondence);
    m.d_int = d_interior(a, b);
    m.d_ext = d_exterior(a, b, m.correspondence, w.normalized_exterior);
    m.d_loc = d_location(a, b, w.tolerance_px);
    m.total = weighted_total(m, w);
    return m;
}

std::vector<LandmarkMatch> distance_table(std::span<const Landmark> a, std::span<const Landmark> b,
                                          const MatchWeights& w) {
    const auto na = static_cast<std::ptrdiff_t>(a.size());
    const auto nb = static_cast<std::ptrdiff_t>(b.size());
    std::vector<LandmarkMatch> table(static_cast<std::size_t>(na * nb));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < na * nb; ++k) {
        table[static_cast<std::size_t>(k)] =
            landmark_distance(a[static_cast<std::size_t>(k / nb)], b[static_cast<std::size_t>(k % nb)], w);
    }
    return table;
}

std::vector<LandmarkMatch> mutual_nearest(std::span<const LandmarkMatch> table, int n_a, int n_b) {
    std::vector<int> best_b(static_cast<std::size_t>(n_a), -1), best_a(static_cast<std::size_t>(n_b), -1);
    auto at = [&](int i, int j) -> const LandmarkMatch& { return table[static_cast<std::size_t>(i) * n_b + j]; };
    for (int i = 0; i < n_a; ++i) {
        for (int j = 0; j < n_b; ++j) {
            auto& cur = best_b[static_cast<std::size_t>(i)];
            if (cur < 0 || at(i, j).total < at(i, cur).total) cur = j;
        }
    }
    for (int j = 0; j < n_b; ++j) {
        for (int i = 0; i < n_a; ++i) {
            auto& cur = best_a[static_cast<std::size_t>(j)];
            if (cur < 0 || at(i, j).total < at(cur, j).total) cur = i;
        }
    }
    std::vector<LandmarkMatch> out;
    for (int i = 0; i < n_a; ++i) {
        const int j = best_b[static_cast<std::size_t>(i)];
        if (j >= 0 && best_a[static_cast<std::size_t>(j)] == i) {
            LandmarkMatch m = at(i, j);
            m.a = i;
            m.b = j;
            out.push_back(std::move(m));
        }
    }
    return out;
}

std::vector<LandmarkMatch> mutual_nearest_match(std::span<const Landmark> a, std::span<const Landmark> b,
                                                const MatchWeights& w) {
    if (a.empty() || b.empty()) throw ParameterError("mutual_nearest_match needs two nonempty landmark lists");
    const auto table = distance_table(a, b, w);
    auto matches = mutual_nearest(table, static_cast<int>(a.size()), static_cast<int>(b.size()));
    for (auto& m : matches) {
        m.a = a[static_cast<std::size_t>(m.a)].id;
        m.b = b[static_cast<std::size_t>(m.b)].id;
    }
    return matches;
}

nlohmann::json landmark_to_json(const Landmark& l) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : l.segments) segs.push_back({s.interior, s.exterior});
    nlohmann::json mids = nlohmann::json::array();
    for (const auto& p : l.midpoints) mids.push_back({p.x, p.y});
    nlohmann::json ext = nlohmann::json::array();
    for (const auto& h : l.exterior) ext.push_back(h.counts);
    return {{"id", l.id},
            {"kind", to_string(l.kind)},
            {"rank", l.rank},
            {"score", l.score},
            {"centroid", {l.centroid.x, l.centroid.y}},
            {"members", l.members},
            {"interior", l.interior.counts},
            {"segments", segs},
            {"midpoints", mids},
            {"exterior", ext}};
}

Landmark landmark_from_json(const nlohmann::json& j) {
    try {
        Landmark l;
        l.id = j.at("id").get<int>();
        l.kind = landmark_kind_from_string(j.at("kind").get<std::string>());
        l.rank = j.at("rank").get<int>();
        l.score = j.at("score").get<double>();
        l.centroid = {j.at("centroid").at(0).get<double>(), j.at("centroid").at(1).get<double>()};
        l.members = j.at("members").get<std::vector<int>>();
        l.interior = TextonHistogram(j.at("interior").get<std::vector<std::int64_t>>());
        for (const auto& s : j.at("segments")) l.segments.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
        for (const auto& p : j.at("midpoints")) l.midpoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& h : j.at("exterior")) l.exterior.emplace_back(h.get<std::vector<std::int64_t>>());
        if (l.midpoints.size() != l.segments.size() || l.exterior.size() != l.segments.size()) {
            throw InputError("landmark segment, midpoint and exterior lists differ in length");
        }
        return l;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed landmark: ") + e.what());
    }
}

nlohmann::json match_report(std::span<const LandmarkMatch> matches, const MatchWeights& w) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& m : matches) {
        pairs.push_back({{"a", m.a},
                         {"b", m.b},
                         {"D", m.total},
                         {"D_int", m.d_int},
                         {"D_shape", m.d_shape},
                         {"D_ext", m.d_ext},
                         {"D_loc", m.d_loc}});
    }
    return {{"version", kMatchReportVersion}, {"pairs", pairs}, {"weights", w}, {"tolerance_px", w.tolerance_px}};
}

}  // namespace texmark::matching
