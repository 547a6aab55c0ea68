#include "texmark/image.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "texmark/error.hpp"

namespace texmark {

GrayImage GrayImage::filled(int width, int height, float value) {
    if (width <= 0 || height <= 0) throw ParameterError("image dimensions must be positive");
    GrayImage img;
    img.width = width;
    img.height = height;
    img.intensities.assign(img.pixel_count(), value);
    img.foreground.assign(img.pixel_count(), 1);
    return img;
}

std::size_t GrayImage::foreground_count() const {
    return static_cast<std::size_t>(std::count_if(foreground.begin(), foreground.end(),
                                                  [](std::uint8_t m) { return m != 0; }));
}

void GrayImage::validate() const {
    if (width <= 0 || height <= 0) throw ParameterError("image dimensions must be positive");
    if (intensities.size() != pixel_count()) throw ParameterError("intensity buffer size mismatch");
    if (foreground.size() != pixel_count()) throw ParameterError("mask size differs from image");
}

GrayImage read_gray_image(const std::filesystem::path& path) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
    if (raw.empty()) throw InputError("cannot read image: " + path.string());
    if (raw.channels() == 3) {
        cv::cvtColor(raw, raw, cv::COLOR_BGR2GRAY);
    } else if (raw.channels() == 4) {
        cv::cvtColor(raw, raw, cv::COLOR_BGRA2GRAY);
    } else if (raw.channels() != 1) {
        throw InputError("unsupported channel count in " + path.string());
    }

    double scale = 1.0;
    switch (raw.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        case CV_32F: scale = 1.0; break;
        default: throw InputError("unsupported bit depth in " + path.string());
    }
    cv::Mat as_float;
    raw.convertTo(as_float, CV_32F, scale);

    GrayImage img = GrayImage::filled(as_float.cols, as_float.rows, 0.0f);
    for (int y = 0; y < img.height; ++y) {
        const float* row = as_float.ptr<float>(y);
        std::copy(row, row + img.width, img.intensities.begin() + img.index(0, y));
    }
    for (float& v : img.intensities) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

void write_gray_png(const std::filesystem::path& path, const GrayImage& image) {
    image.validate();
    cv::Mat out(image.height, image.width, CV_8U);
    for (int y = 0; y < image.height; ++y) {
        auto* row = out.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width; ++x) {
            row[x] = static_cast<std::uint8_t>(
                std::lround(std::clamp(image.at(x, y), 0.0f, 1.0f) * 255.0f));
        }
    }
    if (!cv::imwrite(path.string(), out)) throw InputError("cannot write " + path.string());
}

void write_label_png16(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::int32_t>& labels) {
    if (labels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ParameterError("label buffer size mismatch");
    }
    cv::Mat out(height, width, CV_16U);
    for (int y = 0; y < height; ++y) {
        auto* row = out.ptr<std::uint16_t>(y);
        for (int x = 0; x < width; ++x) {
            const std::int32_t v = labels[static_cast<std::size_t>(y) * width + x];
            if (v + 1 > 65535) throw ParameterError("label exceeds 16-bit range");
            row[x] = static_cast<std::uint16_t>(v < 0 ? 0 : v + 1);
        }
    }
    if (!cv::imwrite(path.string(), out)) throw InputError("cannot write " + path.string());
}

std::vector<std::int32_t> read_label_png16(const std::filesystem::path& path, int& width,
                                           int& height) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
    if (raw.empty() || raw.depth() != CV_16U) throw InputError("not a 16-bit label image: " + path.string());
    width = raw.cols;
    height = raw.rows;
    std::vector<std::int32_t> labels(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const auto* row = raw.ptr<std::uint16_t>(y);
        for (int x = 0; x < width; ++x) {
            labels[static_cast<std::size_t>(y) * width + x] = static_cast<std::int32_t>(row[x]) - 1;
        }
    }
    return labels;
}

}  // namespace texmark
