#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "texmark/image.hpp"
#include "texmark/segmentation.hpp"
#include "texmark/stats.hpp"

namespace testutil {

inline texmark::GrayImage image_from(int w, int h, const std::function<double(int, int)>& f) {
    auto img = texmark::GrayImage::filled(w, h, 0.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<float>(f(x, y));
    }
    return img;
}

/// Grating 0.5 + 0.4 cos(2 pi f (x cos t + y sin t)) with t in degrees, centred on (cx, cy).
inline texmark::GrayImage grating(int w, int h, double f, double theta_deg) {
    const double t = theta_deg * std::numbers::pi / 180.0;
    const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    return image_from(w, h, [&](int x, int y) {
        return 0.5 + 0.4 * std::cos(2.0 * std::numbers::pi * f * ((x - cx) * std::cos(t) + (y - cy) * std::sin(t)));
    });
}

/// Superpixel map from a row-major label grid (-1 = background).
inline texmark::segmentation::SuperpixelMap map_from(int w, int h, std::vector<std::int32_t> labels) {
    texmark::segmentation::SuperpixelMap m;
    m.width = w;
    m.height = h;
    m.labels = std::move(labels);
    texmark::segmentation::recompute_statistics(m);
    return m;
}

/// Map whose superpixels are the cells of a gx x gy grid of c x c squares, ids row-major.
inline texmark::segmentation::SuperpixelMap grid_map(int gx, int gy, int c) {
    std::vector<std::int32_t> labels(static_cast<std::size_t>(gx * c) * (gy * c));
    for (int y = 0; y < gy * c; ++y) {
        for (int x = 0; x < gx * c; ++x) labels[static_cast<std::size_t>(y) * (gx * c) + x] = (y / c) * gx + x / c;
    }
    return map_from(gx * c, gy * c, std::move(labels));
}

inline texmark::stats::TextonHistogram hist(std::vector<std::int64_t> c) {
    return texmark::stats::TextonHistogram(std::move(c));
}

}  // namespace testutil
