#include "texmark/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <opencv2/imgproc.hpp>

#include "texmark/error.hpp"

namespace texmark::synthbench {

namespace {

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

const std::map<TextureKind, std::string>& texture_names() {
    static const std::map<TextureKind, std::string> m{{TextureKind::Grating, "grating"},
                                                      {TextureKind::Plaid, "plaid"},
                                                      {TextureKind::Dots, "dots"},
                                                      {TextureKind::Noise, "noise"}};
    return m;
}

const std::map<ShapeKind, std::string>& shape_names() {
    static const std::map<ShapeKind, std::string> m{
        {ShapeKind::Ellipse, "ellipse"}, {ShapeKind::Blob, "blob"}, {ShapeKind::HalfOpen, "half_open"}};
    return m;
}

template <typename E>
E parse_enum(const std::map<E, std::string>& names, const std::string& s) {
    for (const auto& [k, v] : names) {
        if (v == s) return k;
    }
    throw SpecError("unknown kind '" + s + "'");
}

double texture_value(const TextureSpec& t, double x, double y) {
    const double th = deg2rad(t.orientation_deg);
    const double c = std::cos(th), s = std::sin(th);
    switch (t.kind) {
        case TextureKind::Grating:
            return t.mean + 0.5 * t.contrast * std::cos(2.0 * kPi * t.frequency * (x * c + y * s));
        case TextureKind::Plaid:
            return t.mean + 0.25 * t.contrast *
                                (std::cos(2.0 * kPi * t.frequency * (x * c + y * s)) +
                                 std::cos(2.0 * kPi * t.frequency * (-x * s + y * c)));
        case TextureKind::Dots: {
            const double u = x * c + y * s;
            const double v = -x * s + y * c;
            const double du = u - t.spacing * std::round(u / t.spacing);
            const double dv = v - t.spacing * std::round(v / t.spacing);
            const double bump = std::exp(-(du * du + dv * dv) / (2.0 * t.radius * t.radius));
            const double avg = 2.0 * kPi * t.radius * t.radius / (t.spacing * t.spacing);
            return t.mean + t.contrast * (bump - avg);
        }
        case TextureKind::Noise:
            return t.mean;
    }
    return t.mean;
}

double bounding_radius(const ShapeSpec& s) {
    switch (s.kind) {
        case ShapeKind::Ellipse:
            return std::max(s.rx, s.ry);
        case ShapeKind::Blob: {
            double amp = 0.0;
            for (const double h : s.harmonics) amp += std::abs(h);
            return s.rx * (1.0 + amp);
        }
        case ShapeKind::HalfOpen:
            return s.rx + 0.5 * s.falloff;
    }
    return s.rx;
}

/// Opacity of the shape at (x, y); the truth label is alpha >= 0.5.
double shape_alpha(const ShapeSpec& s, double x, double y) {
    const double dx = x - s.center.x;
    const double dy = y - s.center.y;
    switch (s.kind) {
        case ShapeKind::Ellipse: {
            const double th = deg2rad(s.angle_deg);
            const double u = dx * std::cos(th) + dy * std::sin(th);
            const double v = -dx * std::sin(th) + dy * std::cos(th);
            return (u * u) / (s.rx * s.rx) + (v * v) / (s.ry * s.ry) <= 1.0 ? 1.0 : 0.0;
        }
        case ShapeKind::Blob: {
            const double phi = std::atan2(dy, dx) - deg2rad(s.angle_deg);
            double scale = 1.0;
            for (std::size_t k = 0; k < s.harmonics.size(); ++k) {
                const double ph = k < s.phases.size() ? s.phases[k] : 0.0;
                scale += s.harmonics[k] * std::cos(static_cast<double>(k + 2) * phi + ph);
            }
            return std::hypot(dx, dy) <= s.rx * scale ? 1.0 : 0.0;
        }
        case ShapeKind::HalfOpen: {
            const double r = std::hypot(dx, dy);
            const double th = deg2rad(s.sharp_direction_deg);
            const double cosang = r > 0.0 ? (dx * std::cos(th) + dy * std::sin(th)) / r : 1.0;
            // Falloff width grows from zero at the diameter to full width 30 degrees past it.
            const double w = s.falloff * std::min(1.0, 2.0 * std::max(0.0, -cosang));
            if (w < 0.5) return r <= s.rx ? 1.0 : 0.0;
            return std::clamp((s.rx + 0.5 * w - r) / w, 0.0, 1.0);
        }
    }
    return 0.0;
}

std::vector<PointF> sharp_edge(const ShapeSpec& s) {
    std::vector<PointF> pts;
    const double th = deg2rad(s.sharp_direction_deg);
    const int n = std::max(8, static_cast<int>(std::ceil(kPi * s.rx)));
    for (int k = 0; k <= n; ++k) {
        const double a = th - 0.5 * kPi + kPi * k / n;
        pts.push_back({s.center.x + s.rx * std::cos(a), s.center.y + s.rx * std::sin(a)});
    }
    return pts;
}

struct JitterField {
    double amp = 0.0;
    double ax = 0.0, ay = 0.0, bx = 0.0, by = 0.0;
    double px = 0.0, py = 0.0;
    double scale = 1.0;

    explicit JitterField(const DistortionSpec& d) : amp(d.jitter_amplitude / std::numbers::sqrt2), scale(d.jitter_scale) {
        std::mt19937_64 rng(d.rng_seed ^ 0x6a09e667f3bcc908ULL);
        std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
        const double a = u(rng), b = u(rng);
        ax = std::cos(a);
        ay = std::sin(a);
        bx = std::cos(b);
        by = std::sin(b);
        px = u(rng);
        py = u(rng);
    }

    PointF at(double x, double y) const {
        if (amp == 0.0) return {};
        return {amp * std::sin(2.0 * kPi * (ax * x + ay * y) / scale + px),
                amp * std::sin(2.0 * kPi * (bx * x + by * y) / scale + py)};
    }
};

}  // namespace

void to_json(nlohmann::json& j, const TextureSpec& t) {
    j = {{"kind", texture_names().at(t.kind)},
         {"mean", t.mean},
         {"contrast", t.contrast},
         {"frequency", t.frequency},
         {"orientation_deg", t.orientation_deg},
         {"spacing", t.spacing},
         {"radius", t.radius},
         {"noise", t.noise}};
}

void from_json(const nlohmann::json& j, TextureSpec& t) {
    const TextureSpec d;
    t.kind = parse_enum(texture_names(), j.at("kind").get<std::string>());
    t.mean = j.value("mean", d.mean);
    t.contrast = j.value("contrast", d.contrast);
    t.frequency = j.value("frequency", d.frequency);
    t.orientation_deg = j.value("orientation_deg", d.orientation_deg);
    t.spacing = j.value("spacing", d.spacing);
    t.radius = j.value("radius", d.radius);
    t.noise = j.value("noise", d.noise);
}

void to_json(nlohmann::json& j, const ShapeSpec& s) {
    j = {{"kind", shape_names().at(s.kind)},
         {"texture", s.texture},
         {"center", {s.center.x, s.center.y}},
         {"rx", s.rx},
         {"ry", s.ry},
         {"angle_deg", s.angle_deg},
         {"harmonics", s.harmonics},
         {"phases", s.phases},
         {"sharp_direction_deg", s.sharp_direction_deg},
         {"falloff", s.falloff}};
}

void from_json(const nlohmann::json& j, ShapeSpec& s) {
    const ShapeSpec d;
    s.kind = parse_enum(shape_names(), j.at("kind").get<std::string>());
    s.texture = j.at("texture").get<int>();
    s.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
    s.rx = j.value("rx", d.rx);
    s.ry = j.value("ry", s.rx);
    s.angle_deg = j.value("angle_deg", d.angle_deg);
    s.harmonics = j.value("harmonics", d.harmonics);
    s.phases = j.value("phases", d.phases);
    s.sharp_direction_deg = j.value("sharp_direction_deg", d.sharp_direction_deg);
    s.falloff = j.value("falloff", d.falloff);
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
    j = {{"version", 1},
         {"width", s.width},
         {"height", s.height},
         {"background_texture", s.background_texture},
         {"textures", s.textures},
         {"shapes", s.shapes},
         {"rng_seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
    try {
        if (j.value("version", 1) != 1) throw SpecError("unsupported scene spec version");
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.background_texture = j.value("background_texture", 0);
        s.textures = j.at("textures").get<std::vector<TextureSpec>>();
        s.shapes = j.value("shapes", std::vector<ShapeSpec>{});
        s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed scene spec: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const DistortionSpec& d) {
    j = {{"version", 1},
         {"rotation_deg", d.rotation_deg},
         {"translation", {d.translation.x, d.translation.y}},
         {"jitter_amplitude", d.jitter_amplitude},
         {"jitter_scale", d.jitter_scale},
         {"noise_sigma", d.noise_sigma},
         {"rng_seed", d.rng_seed}};
}

void from_json(const nlohmann::json& j, DistortionSpec& d) {
    try {
        if (j.value("version", 1) != 1) throw SpecError("unsupported distortion spec version");
        const DistortionSpec def;
        d.rotation_deg = j.value("rotation_deg", def.rotation_deg);
        if (j.contains("translation")) {
            d.translation = {j.at("translation").at(0).get<double>(), j.at("translation").at(1).get<double>()};
        }
        d.jitter_amplitude = j.value("jitter_amplitude", def.jitter_amplitude);
        d.jitter_scale = j.value("jitter_scale", def.jitter_scale);
        d.noise_sigma = j.value("noise_sigma", def.noise_sigma);
        d.rng_seed = j.value("rng_seed", def.rng_seed);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed distortion spec: ") + e.what());
    }
    if (!std::isfinite(d.rotation_deg) || d.rotation_deg < -180.0 || d.rotation_deg > 180.0) {
        throw SpecError("rotation must lie in [-180, 180] degrees");
    }
    if (d.jitter_amplitude < 0.0 || d.noise_sigma < 0.0 || !(d.jitter_scale > 0.0)) {
        throw SpecError("jitter and noise parameters must be non-negative");
    }
}

Scene render_scene(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw SpecError("canvas must be nonempty");
    const int n_tex = static_cast<int>(spec.textures.size());
    if (spec.background_texture < 0 || spec.background_texture >= n_tex) {
        throw SpecError("background texture index out of range");
    }
    for (const auto& s : spec.shapes) {
        if (s.texture < 0 || s.texture >= n_tex) throw SpecError("shape texture index out of range");
        if (!(s.rx > 0.0) || !(s.ry > 0.0)) throw SpecError("shape radii must be positive");
        const double r = bounding_radius(s);
        if (s.center.x - r < 0.0 || s.center.y - r < 0.0 || s.center.x + r > spec.width - 1 ||
            s.center.y + r > spec.height - 1) {
            throw SpecError("shape extends beyond the canvas");
        }
    }

    const int w = spec.width, h = spec.height;
    const auto npix = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<float> alpha(npix, 0.0f);
    std::vector<std::int32_t> owner(npix, -1);
    Scene scene;
    scene.labels.assign(npix, 0);
    for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
        const auto& s = spec.shapes[k];
        scene.kinds.push_back(s.kind);
        scene.open_edges.push_back(s.kind == ShapeKind::HalfOpen ? sharp_edge(s) : std::vector<PointF>{});
        const double r = bounding_radius(s);
        const int x0 = std::max(0, static_cast<int>(std::floor(s.center.x - r)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.center.x + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(s.center.y - r)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.center.y + r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double a = shape_alpha(s, x, y);
                if (a <= 0.0) continue;
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (owner[i] >= 0) throw SpecError("shapes overlap");
                owner[i] = static_cast<std::int32_t>(k);
                alpha[i] = static_cast<float>(a);
                if (a >= 0.5) scene.labels[i] = static_cast<std::int32_t>(k + 1);
            }
        }
    }

    scene.image = GrayImage::filled(w, h, 0.0f);
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto& bg = spec.textures[static_cast<std::size_t>(spec.background_texture)];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double v = texture_value(bg, x, y);
            double sigma = bg.noise;
            if (owner[i] >= 0) {
                const auto& t = spec.textures[static_cast<std::size_t>(spec.shapes[owner[i]].texture)];
                const double a = alpha[i];
                v = (1.0 - a) * v + a * texture_value(t, x, y);
                sigma = (1.0 - a) * sigma + a * t.noise;
            }
            const double n = gauss(rng);
            scene.image.intensities[i] = static_cast<float>(std::clamp(v + sigma * n, 0.0, 1.0));
        }
    }
    return scene;
}

PointF elastic_displacement(const DistortionSpec& d, double x, double y) { return JitterField(d).at(x, y); }

Distorted distort(const GrayImage& image, std::span<const std::int32_t> labels, const DistortionSpec& d) {
    image.validate();
    if (labels.size() != image.pixel_count()) throw ParameterError("label image does not match the image");
    const int w = image.width, h = image.height;
    const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    const double th = deg2rad(d.rotation_deg);
    const double c = std::cos(th), s = std::sin(th);
    const JitterField jitter(d);

    cv::Mat mapx(h, w, CV_32F), mapy(h, w, CV_32F);
    Distorted out;
    out.labels.assign(labels.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double qx = x - cx - d.translation.x;
            const double qy = y - cy - d.translation.y;
            const PointF e = jitter.at(x, y);
            const double sx = c * qx + s * qy + cx + e.x;
            const double sy = -s * qx + c * qy + cy + e.y;
            mapx.at<float>(y, x) = static_cast<float>(sx);
            mapy.at<float>(y, x) = static_cast<float>(sy);
            const long ix = std::lround(sx), iy = std::lround(sy);
            if (ix >= 0 && iy >= 0 && ix < w && iy < h) {
                out.labels[static_cast<std::size_t>(y) * w + x] = labels[static_cast<std::size_t>(iy) * w + ix];
            }
        }
    }

    const cv::Mat src(h, w, CV_32F, const_cast<float*>(image.intensities.data()));
    cv::Mat dst;
    cv::remap(src, dst, mapx, mapy, cv::INTER_LINEAR, cv::BORDER_REFLECT);
    out.image = GrayImage::filled(w, h, 0.0f);
    std::mt19937_64 rng(d.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = dst.at<float>(y, x);
            if (d.noise_sigma > 0.0) v = std::clamp(v + d.noise_sigma * gauss(rng), 0.0, 1.0);
            out.image.intensities[static_cast<std::size_t>(y) * w + x] = static_cast<float>(v);
        }
    }
    out.image.foreground = image.foreground;
    return out;
}

SceneSpec random_scene(std::uint64_t seed, int width, int height, int n_compact) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.rng_seed = seed;
    spec.background_texture = 0;

    auto tex = [](TextureKind k, double mean, double contrast, double freq) {
        TextureSpec t;
        t.kind = k;
        t.mean = mean;
        t.contrast = contrast;
        t.frequency = freq;
        return t;
    };
    spec.textures = {tex(TextureKind::Noise, 0.5, 0.0, 0.0),    tex(TextureKind::Grating, 0.3, 0.5, 0.2),
                     tex(TextureKind::Grating, 0.72, 0.45, 0.1), tex(TextureKind::Grating, 0.38, 0.5, 0.05),
                     tex(TextureKind::Plaid, 0.62, 0.5, 0.1414), tex(TextureKind::Plaid, 0.22, 0.4, 0.0707),
                     tex(TextureKind::Dots, 0.8, 0.5, 0.0)};
    spec.textures[0].noise = 0.06;
    spec.textures[6].spacing = 10.0;
    spec.textures[6].radius = 2.0;
    for (std::size_t t = 1; t < spec.textures.size(); ++t) spec.textures[t].orientation_deg = uni(0.0, 180.0);

    const int n_shapes = n_compact + 1;
    std::vector<int> texture_ids;
    for (int t = 1; t < static_cast<int>(spec.textures.size()); ++t) texture_ids.push_back(t);
    std::shuffle(texture_ids.begin(), texture_ids.end(), rng);

    const double margin = 24.0, gap = 40.0;
    // A crowded layout can leave no room for later shapes; redraw the whole
    // layout from the same stream until everything fits.
    for (int layout = 0; layout < 50; ++layout) {
        spec.shapes.clear();
        bool complete = true;
        for (int k = 0; k < n_shapes && complete; ++k) {
            ShapeSpec s;
            s.texture = texture_ids[static_cast<std::size_t>(k) % texture_ids.size()];
            if (k == n_compact) {
                s.kind = ShapeKind::HalfOpen;
                s.rx = s.ry = uni(75.0, 95.0);
                s.falloff = 160.0;
                s.sharp_direction_deg = uni(-180.0, 180.0);
            } else if (uni(0.0, 1.0) < 0.5) {
                s.kind = ShapeKind::Ellipse;
                s.rx = uni(55.0, 110.0);
                s.ry = uni(55.0, 110.0);
                s.angle_deg = uni(0.0, 180.0);
            } else {
                s.kind = ShapeKind::Blob;
                s.rx = s.ry = uni(60.0, 95.0);
                s.harmonics = {uni(0.0, 0.15), uni(0.0, 0.1)};
                s.phases = {uni(0.0, 2.0 * kPi), uni(0.0, 2.0 * kPi)};
                s.angle_deg = uni(0.0, 180.0);
            }
            const double r = bounding_radius(s);
            bool placed = false;
            for (int attempt = 0; attempt < 5000 && !placed; ++attempt) {
                s.center = {uni(margin + r, width - 1 - margin - r), uni(margin + r, height - 1 - margin - r)};
                placed = true;
                for (const auto& o : spec.shapes) {
                    if (std::hypot(o.center.x - s.center.x, o.center.y - s.center.y) < r + bounding_radius(o) + gap) {
                        placed = false;
                        break;
                    }
                }
            }
            if (!placed) {
                complete = false;
                break;
            }
            spec.shapes.push_back(s);
        }
        if (complete) return spec;
    }
    throw SpecError("could not place all shapes on the canvas");
}

DistortionSpec random_distortion(std::uint64_t seed, const Scene& scene, const DistortionLimits& limits) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    DistortionSpec d;
    d.rng_seed = seed;
    d.rotation_deg = uni(-limits.max_rotation_deg, limits.max_rotation_deg);
    d.jitter_amplitude = uni(0.5 * limits.max_jitter, limits.max_jitter);
    d.jitter_scale = uni(150.0, 300.0);
    d.noise_sigma = uni(0.4 * limits.max_noise, limits.max_noise);

    const int w = scene.image.width, h = scene.image.height;
    const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    const double th = deg2rad(d.rotation_deg);
    const double c = std::cos(th), s = std::sin(th);
    double minx = cx, maxx = cx, miny = cy, maxy = cy;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (scene.labels[static_cast<std::size_t>(y) * w + x] == 0) continue;
            const double px = c * (x - cx) - s * (y - cy) + cx;
            const double py = s * (x - cx) + c * (y - cy) + cy;
            minx = std::min(minx, px);
            maxx = std::max(maxx, px);
            miny = std::min(miny, py);
            maxy = std::max(maxy, py);
        }
    }
    const double pad = limits.max_jitter + 4.0;
    auto pick = [&](double lo_pos, double hi_pos, double extent) {
        const double lo = std::max(-limits.max_translation, pad - lo_pos);
        const double hi = std::min(limits.max_translation, extent - 1 - pad - hi_pos);
        return lo <= hi ? uni(lo, hi) : 0.0;
    };
    d.translation = {pick(minx, maxx, w), pick(miny, maxy, h)};
    return d;
}

std::vector<std::uint8_t> landmark_mask(const matching::Landmark& l, const segmentation::SuperpixelMap& spmap) {
    std::vector<char> member(static_cast<std::size_t>(spmap.n_superpixels), 0);
    for (const int m : l.members) {
        if (m >= 0 && m < spmap.n_superpixels) member[static_cast<std::size_t>(m)] = 1;
    }
    std::vector<std::uint8_t> mask(spmap.labels.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto lab = spmap.labels[i];
        if (lab >= 0 && member[static_cast<std::size_t>(lab)]) mask[i] = 1;
    }
    return mask;
}

DetectionScore score_detection(std::span<const std::vector<std::uint8_t>> detected,
                               std::span<const std::int32_t> labels, std::span<const int> planted,
                               double iou_threshold) {
    std::int32_t max_label = 0;
    for (const auto l : labels) max_label = std::max(max_label, l);
    std::vector<std::int64_t> label_area(static_cast<std::size_t>(max_label) + 1, 0);
    for (const auto l : labels) ++label_area[static_cast<std::size_t>(std::max(0, l))];

    DetectionScore out;
    out.n_planted = static_cast<int>(planted.size());
    out.n_detected = static_cast<int>(detected.size());
    out.best_iou.assign(planted.size(), 0.0);
    for (const auto& mask : detected) {
        if (mask.size() != labels.size()) throw ParameterError("detected mask does not match the label image");
        std::vector<std::int64_t> inter(label_area.size(), 0);
        std::int64_t size = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i]) continue;
            ++size;
            ++inter[static_cast<std::size_t>(std::max(0, labels[i]))];
        }
        bool hit = false;
        for (std::size_t p = 0; p < planted.size(); ++p) {
            const auto lab = static_cast<std::size_t>(planted[p] + 1);
            if (lab >= label_area.size()) continue;
            const double uni = static_cast<double>(size + label_area[lab] - inter[lab]);
            const double iou = uni > 0.0 ? static_cast<double>(inter[lab]) / uni : 0.0;
            out.best_iou[p] = std::max(out.best_iou[p], iou);
            if (iou >= iou_threshold) hit = true;
        }
        if (hit) ++out.n_true_detections;
    }
    for (const double b : out.best_iou) {
        if (b >= iou_threshold) ++out.n_recovered;
    }
    out.recall = out.n_planted ? static_cast<double>(out.n_recovered) / out.n_planted : 0.0;
    out.precision = out.n_detected ? static_cast<double>(out.n_true_detections) / out.n_detected : 0.0;
    return out;
}

double point_to_polyline(PointF p, std::span<const PointF> polyline) {
    if (polyline.empty()) throw ParameterError("empty polyline");
    double best = std::hypot(p.x - polyline[0].x, p.y - polyline[0].y);
    for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
        const PointF a = polyline[k], b = polyline[k + 1];
        const double vx = b.x - a.x, vy = b.y - a.y;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        best = std::min(best, std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy)));
    }
    return best;
}

double fraction_within(std::span<const PointF> points, std::span<const PointF> polyline, double tolerance) {
    if (points.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& p : points) {
        if (point_to_polyline(p, polyline) <= tolerance) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(points.size());
}

double mean_distance(std::span<const PointF> points, std::span<const PointF> polyline) {
    if (points.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : points) sum += point_to_polyline(p, polyline);
    return sum / static_cast<double>(points.size());
}

std::vector<std::int32_t> superpixel_majority(const segmentation::SuperpixelMap& spmap,
                                              std::span<const std::int32_t> labels) {
    if (labels.size() != spmap.labels.size()) throw ParameterError("label image does not match the superpixel map");
    std::vector<std::map<std::int32_t, std::int64_t>> counts(static_cast<std::size_t>(spmap.n_superpixels));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto sp = spmap.labels[i];
        if (sp >= 0) ++counts[static_cast<std::size_t>(sp)][labels[i]];
    }
    std::vector<std::int32_t> out(counts.size(), 0);
    for (std::size_t s = 0; s < counts.size(); ++s) {
        std::int64_t best = -1;
        for (const auto& [lab, n] : counts[s]) {
            if (n > best) {
                best = n;
                out[s] = lab;
            }
        }
    }
    return out;
}

namespace {

LandmarkTruth side_truth(std::span<const segmentation::Segment> segments, const segmentation::SuperpixelMap& spmap,
                         std::span<const std::int32_t> labels) {
    LandmarkTruth t;
    const auto maj = superpixel_majority(spmap, labels);
    std::map<std::int32_t, int> votes;
    for (const auto& s : segments) {
        for (const int sp : {s.interior, s.exterior}) {
            const auto lab = maj[static_cast<std::size_t>(sp)];
            if (lab > 0) ++votes[lab];
        }
    }
    int best = 0;
    for (const auto& [lab, n] : votes) {
        t.touched.push_back(lab - 1);
        if (n > best) {
            best = n;
            t.primary = lab - 1;
        }
    }
    return t;
}

}  // namespace

LandmarkTruth landmark_truth(const matching::Landmark& l, const segmentation::SuperpixelMap& spmap,
                             std::span<const std::int32_t> labels) {
    LandmarkTruth t;
    if (l.kind == matching::LandmarkKind::Closed) {
        const auto mask = landmark_mask(l, spmap);
        std::map<std::int32_t, std::int64_t> counts;
        std::int64_t size = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i]) continue;
            ++size;
            if (labels[i] > 0) ++counts[labels[i]];
        }
        std::int64_t best = 0;
        for (const auto& [lab, n] : counts) {
            if (n > best) {
                best = n;
                if (2 * n >= size) t.primary = lab - 1;
            }
            if (10 * n >= size) t.touched.push_back(lab - 1);
        }
        if (t.primary >= 0 && !std::binary_search(t.touched.begin(), t.touched.end(), t.primary)) {
            t.touched.push_back(t.primary);
            std::sort(t.touched.begin(), t.touched.end());
        }
        return t;
    }
    return side_truth(l.segments, spmap, labels);
}

LandmarkTruth group_truth(const boundaries::BoundaryGroup& g, const segmentation::SuperpixelMap& spmap,
                          std::span<const std::int32_t> labels) {
    std::vector<segmentation::Segment> segs;
    for (const auto& v : g.segments) segs.push_back(v.segment);
    return side_truth(segs, spmap, labels);
}

MatchScore score_matching(std::span<const matching::LandmarkMatch> matches, std::span<const LandmarkTruth> truth_a,
                          std::span<const LandmarkTruth> truth_b, int n_structures) {
    MatchScore s;
    s.n_structures = n_structures;
    s.n_matches = static_cast<int>(matches.size());
    s.no_matches = matches.empty();
    std::vector<char> matched(static_cast<std::size_t>(std::max(0, n_structures)), 0);
    for (const auto& m : matches) {
        const auto& ta = truth_a[static_cast<std::size_t>(m.a)];
        const auto& tb = truth_b[static_cast<std::size_t>(m.b)];
        if (ta.primary >= 0 && ta.primary == tb.primary) {
            ++s.correct;
            if (ta.primary < n_structures) matched[static_cast<std::size_t>(ta.primary)] = 1;
            continue;
        }
        std::vector<int> common;
        std::set_intersection(ta.touched.begin(), ta.touched.end(), tb.touched.begin(), tb.touched.end(),
                              std::back_inserter(common));
        if (!common.empty()) {
            ++s.partial;
        } else {
            ++s.wrong;
        }
    }
    for (const char c : matched) s.structures_matched += c;
    return s;
}

}  // namespace texmark::synthbench
