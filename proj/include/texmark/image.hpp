#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace texmark {

struct PointF {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PointF&, const PointF&) = default;
};

struct Pixel {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const Pixel& a, const Pixel& b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Single-channel image with intensities in [0, 1] and a foreground mask of
/// the same dimensions. Storage is row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> intensities;
    std::vector<std::uint8_t> foreground;

    static GrayImage filled(int width, int height, float value);

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    float at(int x, int y) const { return intensities[index(x, y)]; }
    float& at(int x, int y) { return intensities[index(x, y)]; }
    bool is_foreground(int x, int y) const { return foreground[index(x, y)] != 0; }
    std::size_t foreground_count() const;

    /// Throws ParameterError when dimensions or buffer sizes are inconsistent.
    void validate() const;
};

/// Reads 8- or 16-bit grayscale PNG/TIFF (colour inputs are converted).
/// Every pixel is foreground. Throws InputError on unreadable files.
GrayImage read_gray_image(const std::filesystem::path& path);

void write_gray_png(const std::filesystem::path& path, const GrayImage& image);

/// 16-bit label image; background (negative) labels are written as 0 and
/// label k as k + 1.
void write_label_png16(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::int32_t>& labels);

std::vector<std::int32_t> read_label_png16(const std::filesystem::path& path, int& width,
                                           int& height);

}  // namespace texmark
