#include "texmark/texture.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>

#include <fftw3.h>

#include "texmark/error.hpp"

namespace texmark::texture {

void to_json(nlohmann::json& j, const GaborParams& p) {
    j = nlohmann::json{{"n_orientations", p.n_orientations}, {"n_scales", p.n_scales},
                       {"base_frequency", p.base_frequency}, {"frequency_ratio", p.frequency_ratio},
                       {"bandwidth", p.bandwidth},           {"truncation", p.truncation}};
}

void from_json(const nlohmann::json& j, GaborParams& p) {
    GaborParams d;
    p.n_orientations = j.value("n_orientations", d.n_orientations);
    p.n_scales = j.value("n_scales", d.n_scales);
    p.base_frequency = j.value("base_frequency", d.base_frequency);
    p.frequency_ratio = j.value("frequency_ratio", d.frequency_ratio);
    p.bandwidth = j.value("bandwidth", d.bandwidth);
    p.truncation = j.value("truncation", d.truncation);
}

GaborBank::GaborBank(GaborParams params, std::vector<GaborKernel> kernels)
    : params_(params), kernels_(std::move(kernels)) {}

double GaborBank::orientation_step() const {
    return std::numbers::pi / static_cast<double>(params_.n_orientations);
}

int GaborBank::max_half_width() const {
    int hw = 0;
    for (const auto& k : kernels_) hw = std::max(hw, k.half_width);
    return hw;
}

double gabor_sigma(double frequency, double bandwidth_octaves) {
    const double b = std::exp2(bandwidth_octaves);
    return std::sqrt(std::log(2.0) / 2.0) * (b + 1.0) / (b - 1.0) / (std::numbers::pi * frequency);
}

GaborBank build_gabor_bank(const GaborParams& params) {
    if (params.n_orientations < 1) throw ParameterError("n_orientations must be >= 1");
    if (params.n_scales < 1) throw ParameterError("n_scales must be >= 1");
    if (!(params.base_frequency > 0.0 && params.base_frequency <= 0.5)) {
        throw ParameterError("base_frequency must lie in (0, 0.5]");
    }
    if (!(params.frequency_ratio > 1.0)) throw ParameterError("frequency_ratio must exceed 1");
    if (!(params.bandwidth > 0.0)) throw ParameterError("bandwidth must be positive");
    if (!(params.truncation > 0.0)) throw ParameterError("truncation must be positive");

    std::vector<GaborKernel> kernels;
    kernels.reserve(static_cast<std::size_t>(params.n_orientations) * params.n_scales);
    for (int o = 0; o < params.n_orientations; ++o) {
        const double theta = o * std::numbers::pi / params.n_orientations;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (int sc = 0; sc < params.n_scales; ++sc) {
            GaborKernel k;
            k.orientation = o;
            k.scale = sc;
            k.theta = theta;
            k.frequency = params.base_frequency / std::pow(params.frequency_ratio, sc);
            k.sigma = gabor_sigma(k.frequency, params.bandwidth);
            k.half_width = std::max(1, static_cast<int>(std::ceil(params.truncation * k.sigma)));
            const int n = k.size();

            std::vector<double> envelope(static_cast<std::size_t>(n) * n);
            std::vector<std::complex<double>> carrier(envelope.size());
            double env_sum = 0.0;
            for (int dy = -k.half_width; dy <= k.half_width; ++dy) {
                for (int dx = -k.half_width; dx <= k.half_width; ++dx) {
                    const std::size_t idx =
                        static_cast<std::size_t>(dy + k.half_width) * n + (dx + k.half_width);
                    const double e = std::exp(-(dx * dx + dy * dy) / (2.0 * k.sigma * k.sigma));
                    const double phase = 2.0 * std::numbers::pi * k.frequency * (dx * c + dy * s);
                    envelope[idx] = e;
                    carrier[idx] = std::polar(1.0, phase);
                    env_sum += e;
                }
            }
            std::complex<double> dc = 0.0;
            for (std::size_t i = 0; i < envelope.size(); ++i) {
                envelope[i] /= env_sum;
                dc += envelope[i] * carrier[i];
            }
            // Envelope sums to one, so subtracting dc * envelope zeroes the mean.
            k.taps.resize(envelope.size());
            for (std::size_t i = 0; i < envelope.size(); ++i) {
                k.taps[i] = envelope[i] * (carrier[i] - dc);
            }
            kernels.push_back(std::move(k));
        }
    }
    return GaborBank(params, std::move(kernels));
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n)
        : data(static_cast<fftwf_complex*>(fftwf_malloc(sizeof(fftwf_complex) * n))) {
        if (data == nullptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftwf_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    fftwf_complex* data;
};

struct FftwPlan {
    FftwPlan(int height, int width, fftwf_complex* buf, int sign) {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftwf_plan_dft_2d(height, width, buf, buf, sign, FFTW_ESTIMATE);
        if (plan == nullptr) throw Error("FFTW planning failed");
    }
    ~FftwPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        fftwf_destroy_plan(plan);
    }
    FftwPlan(const FftwPlan&) = delete;
    FftwPlan& operator=(const FftwPlan&) = delete;

    void execute(fftwf_complex* buf) const { fftwf_execute_dft(plan, buf, buf); }

    fftwf_plan plan;
};

}  // namespace

FeatureField apply_bank(const GrayImage& image, const GaborBank& bank) {
    image.validate();
    if (bank.kernels().empty()) throw ParameterError("empty Gabor bank");

    const int w = image.width;
    const int h = image.height;
    const std::size_t n = image.pixel_count();
    const int dim = bank.dimension();
    const int border = bank.max_half_width();

    FeatureField field;
    field.width = w;
    field.height = h;
    field.n_orientations = bank.n_orientations();
    field.n_scales = bank.n_scales();
    field.mask.assign(n, 0);
    field.values.assign(n * static_cast<std::size_t>(dim), 0.0f);

    std::vector<std::size_t> active;
    for (int y = border; y < h - border; ++y) {
        for (int x = border; x < w - border; ++x) {
            const std::size_t idx = image.index(x, y);
            if (image.foreground[idx] != 0) {
                field.mask[idx] = 1;
                active.push_back(idx);
            }
        }
    }
    if (active.empty()) return field;

    FftwBuffer spectrum(n);
    FftwBuffer kernel(n);
    FftwPlan forward(h, w, spectrum.data, FFTW_FORWARD);
    FftwPlan backward(h, w, kernel.data, FFTW_BACKWARD);

    // Kernels are zero-mean, so removing the image mean changes nothing but
    // the rounding error carried by the DC bin.
    const double mean =
        std::accumulate(image.intensities.begin(), image.intensities.end(), 0.0) /
        static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        spectrum.data[i][0] = static_cast<float>(image.intensities[i] - mean);
        spectrum.data[i][1] = 0.0f;
    }
    forward.execute(spectrum.data);

    const float inv_n = 1.0f / static_cast<float>(n);
    for (const GaborKernel& k : bank.kernels()) {
        std::fill_n(&kernel.data[0][0], 2 * n, 0.0f);
        for (int dy = -k.half_width; dy <= k.half_width; ++dy) {
            const int yy = ((dy % h) + h) % h;
            for (int dx = -k.half_width; dx <= k.half_width; ++dx) {
                const int xx = ((dx % w) + w) % w;
                const std::complex<double> t = k.tap(dx, dy);
                auto& dst = kernel.data[static_cast<std::size_t>(yy) * w + xx];
                dst[0] += static_cast<float>(t.real());
                dst[1] += static_cast<float>(t.imag());
            }
        }
        forward.execute(kernel.data);
        for (std::size_t i = 0; i < n; ++i) {
            const float ar = spectrum.data[i][0], ai = spectrum.data[i][1];
            const float br = kernel.data[i][0], bi = kernel.data[i][1];
            kernel.data[i][0] = ar * br - ai * bi;
            kernel.data[i][1] = ar * bi + ai * br;
        }
        backward.execute(kernel.data);

        const std::size_t channel =
            static_cast<std::size_t>(k.orientation) * bank.n_scales() + k.scale;
        for (const std::size_t idx : active) {
            const float re = kernel.data[idx][0] * inv_n;
            const float im = kernel.data[idx][1] * inv_n;
            field.values[idx * dim + channel] = std::sqrt(re * re + im * im);
        }
    }
    return field;
}

std::vector<double> directional_energy(std::span<const float> feature, int n_orientations,
                                       int n_scales) {
    std::vector<double> energy(static_cast<std::size_t>(n_orientations), 0.0);
    for (int o = 0; o < n_orientations; ++o) {
        for (int s = 0; s < n_scales; ++s) energy[o] += feature[static_cast<std::size_t>(o) * n_scales + s];
    }
    return energy;
}

int rotation_align_into(std::span<const float> feature, std::span<float> out, int n_orientations,
                        int n_scales) {
    const std::size_t dim = static_cast<std::size_t>(n_orientations) * n_scales;
    if (feature.size() != dim || out.size() != dim) {
        throw ParameterError("feature dimension does not match orientation x scale layout");
    }
    int mode = 0;
    double best = -1.0;
    for (int o = 0; o < n_orientations; ++o) {
        double e = 0.0;
        for (int s = 0; s < n_scales; ++s) e += feature[static_cast<std::size_t>(o) * n_scales + s];
        if (e > best) {
            best = e;
            mode = o;
        }
    }
    for (int o = 0; o < n_orientations; ++o) {
        const int dst = (o - mode + n_orientations) % n_orientations;
        std::copy_n(feature.begin() + static_cast<std::ptrdiff_t>(o) * n_scales, n_scales,
                    out.begin() + static_cast<std::ptrdiff_t>(dst) * n_scales);
    }
    return mode;
}

AlignedFeature rotation_align(std::span<const float> feature, int n_orientations, int n_scales) {
    AlignedFeature result;
    result.aligned.resize(feature.size());
    result.mode_index = rotation_align_into(feature, result.aligned, n_orientations, n_scales);
    return result;
}

void FeatureSample::append(const FeatureSample& other) {
    if (other.size() == 0) return;
    if (dimension == 0) dimension = other.dimension;
    if (dimension != other.dimension) throw ParameterError("sample dimensions differ");
    values.insert(values.end(), other.values.begin(), other.values.end());
}

FeatureSample sample_aligned_features(const FeatureField& field, std::size_t max_samples,
                                      std::uint64_t rng_seed) {
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < field.mask.size(); ++i) {
        if (field.mask[i] != 0) pixels.push_back(i);
    }
    if (pixels.size() > max_samples) {
        std::mt19937_64 rng(rng_seed);
        for (std::size_t i = 0; i < max_samples; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (pixels.size() - i));
            std::swap(pixels[i], pixels[j]);
        }
        pixels.resize(max_samples);
        std::sort(pixels.begin(), pixels.end());
    }

    FeatureSample sample;
    sample.dimension = field.dimension();
    sample.values.resize(pixels.size() * static_cast<std::size_t>(sample.dimension));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        rotation_align_into(field.at(pixels[i]),
                            std::span<float>(sample.values.data() + i * sample.dimension,
                                             static_cast<std::size_t>(sample.dimension)),
                            field.n_orientations, field.n_scales);
    }
    return sample;
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

float squared_distance(const float* a, const float* b, int dim) {
    float acc = 0.0f;
    for (int i = 0; i < dim; ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

TextonCodebook learn_codebook(const FeatureSample& sample, int n_orientations, int n_scales,
                              const CodebookOptions& options) {
    const int dim = n_orientations * n_scales;
    if (sample.dimension != dim) throw ParameterError("sample dimension does not match bank layout");
    if (options.initial_k < 1) throw ParameterError("initial_k must be >= 1");
    const std::size_t n = sample.size();
    const auto k = static_cast<std::size_t>(options.initial_k);
    if (n < k) throw ParameterError("feature sample smaller than initial_k");
    if (options.merge_threshold && *options.merge_threshold < 0.0) {
        throw ParameterError("merge_threshold must be non-negative");
    }

    const float* data = sample.values.data();
    std::mt19937_64 rng(options.rng_seed);

    // K-Means++ seeding.
    std::vector<float> centers(k * dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> chosen(n, 0);
    std::size_t first = static_cast<std::size_t>(rng() % n);
    std::copy_n(data + first * dim, dim, centers.begin());
    chosen[first] = 1;
    for (std::size_t c = 1; c < k; ++c) {
        const float* prev = centers.data() + (c - 1) * dim;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], static_cast<double>(squared_distance(data + i * dim, prev, dim)));
            total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == n) {
            // Degenerate data: fall back to the first point not yet used.
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
            if (pick == n) pick = 0;
        }
        chosen[pick] = 1;
        std::copy_n(data + pick * dim, dim, centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }

    TextonCodebook book;
    book.n_orientations = n_orientations;
    book.n_scales = n_scales;
    book.rng_seed = options.rng_seed;
    book.initial_k = options.initial_k;

    std::vector<std::int32_t> assignment(n, -1);
    std::vector<float> dist(n, 0.0f);
    std::vector<double> sums(k * dim);
    std::vector<std::int64_t> counts(k);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        bool changed = false;
        double objective = 0.0;
#pragma omp parallel for reduction(|| : changed) schedule(static)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const float* x = data + i * dim;
            std::int32_t best = 0;
            float best_d = squared_distance(x, centers.data(), dim);
            for (std::size_t c = 1; c < k; ++c) {
                const float d = squared_distance(x, centers.data() + c * dim, dim);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::int32_t>(c);
                }
            }
            if (assignment[i] != best) changed = true;
            assignment[i] = best;
            dist[i] = best_d;
        }
        for (std::size_t i = 0; i < n; ++i) objective += dist[i];
        book.objective_trace.push_back(objective);
        if (!changed && iter > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assignment[i]);
            ++counts[c];
            const float* x = data + i * dim;
            for (int d = 0; d < dim; ++d) sums[c * dim + d] += x[d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster at the worst-fit point; the next
                // assignment pass can only lower the objective.
                const auto far = static_cast<std::size_t>(
                    std::max_element(dist.begin(), dist.end()) - dist.begin());
                std::copy_n(data + far * dim, dim, centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
                dist[far] = 0.0f;
                continue;
            }
            for (int d = 0; d < dim; ++d) {
                centers[c * dim + d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
            }
        }
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(assignment[i])];

    std::vector<std::vector<double>> cents;
    std::vector<std::int64_t> cnts;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        cents.emplace_back(centers.begin() + static_cast<std::ptrdiff_t>(c * dim),
                           centers.begin() + static_cast<std::ptrdiff_t>((c + 1) * dim));
        cnts.push_back(counts[c]);
    }

    double threshold = 0.0;
    if (options.merge_threshold) {
        threshold = *options.merge_threshold;
    } else if (cents.size() >= 2) {
        std::vector<double> pair_d;
        for (std::size_t a = 0; a < cents.size(); ++a) {
            for (std::size_t b = a + 1; b < cents.size(); ++b) {
                pair_d.push_back(std::sqrt(squared_distance(cents[a], cents[b])));
            }
        }
        const std::size_t mid = pair_d.size() / 2;
        std::nth_element(pair_d.begin(), pair_d.begin() + static_cast<std::ptrdiff_t>(mid), pair_d.end());
        double median = pair_d[mid];
        if (pair_d.size() % 2 == 0) {
            median = 0.5 * (median + *std::max_element(pair_d.begin(),
                                                       pair_d.begin() + static_cast<std::ptrdiff_t>(mid)));
        }
        threshold = options.merge_factor * median;
    }
    book.merge_threshold = threshold;

    // Single-linkage merging; repeated because merged means can land closer
    // than the threshold to another centroid.
    const double t2 = threshold * threshold;
    for (;;) {
        std::vector<std::size_t> parent(cents.size());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        bool merged = false;
        for (std::size_t a = 0; a < cents.size(); ++a) {
            for (std::size_t b = a + 1; b < cents.size(); ++b) {
                if (squared_distance(cents[a], cents[b]) < t2) {
                    const std::size_t ra = find_root(parent, a);
                    const std::size_t rb = find_root(parent, b);
                    if (ra != rb) {
                        parent[std::max(ra, rb)] = std::min(ra, rb);
                        merged = true;
                    }
                }
            }
        }
        if (!merged) break;

        std::vector<std::vector<double>> next;
        std::vector<std::int64_t> next_counts;
        std::vector<std::size_t> slot(cents.size(), SIZE_MAX);
        for (std::size_t a = 0; a < cents.size(); ++a) {
            const std::size_t r = find_root(parent, a);
            if (slot[r] == SIZE_MAX) {
                slot[r] = next.size();
                next.emplace_back(static_cast<std::size_t>(dim), 0.0);
                next_counts.push_back(0);
            }
            const std::size_t s = slot[r];
            for (int d = 0; d < dim; ++d) next[s][d] += cents[a][d] * static_cast<double>(cnts[a]);
            next_counts[s] += cnts[a];
        }
        for (std::size_t s = 0; s < next.size(); ++s) {
            for (double& v : next[s]) v /= static_cast<double>(next_counts[s]);
        }
        cents = std::move(next);
        cnts = std::move(next_counts);
    }

    for (std::size_t c = 0; c < cents.size(); ++c) {
        book.centroids.emplace_back(cents[c].begin(), cents[c].end());
        book.counts.push_back(cnts[c]);
    }
    return book;
}

int nearest_texton(std::span<const float> aligned, const TextonCodebook& codebook) {
    const int dim = static_cast<int>(aligned.size());
    int best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (int c = 0; c < codebook.size(); ++c) {
        const float d = squared_distance(aligned.data(), codebook.centroids[c].data(), dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

TextonMap assign_textons(const FeatureField& field, const TextonCodebook& codebook) {
    if (codebook.size() == 0) throw ParameterError("empty codebook");
    if (field.n_orientations != codebook.n_orientations || field.n_scales != codebook.n_scales) {
        throw ParameterError("feature layout does not match codebook");
    }
    TextonMap map;
    map.width = field.width;
    map.height = field.height;
    map.n_textons = codebook.size();
    map.labels.assign(field.pixel_count(), TextonMap::kNoTexton);

    const int dim = field.dimension();
#pragma omp parallel
    {
        std::vector<float> aligned(static_cast<std::size_t>(dim));
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(field.pixel_count()); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (field.mask[i] == 0) continue;
            rotation_align_into(field.at(i), aligned, field.n_orientations, field.n_scales);
            map.labels[i] = nearest_texton(aligned, codebook);
        }
    }
    return map;
}

nlohmann::json codebook_to_json(const TextonCodebook& codebook) {
    nlohmann::json j;
    j["version"] = kCodebookVersion;
    j["n_orientations"] = codebook.n_orientations;
    j["n_scales"] = codebook.n_scales;
    j["gabor"] = codebook.gabor;
    j["centroids"] = codebook.centroids;
    j["counts"] = codebook.counts;
    j["merge_threshold"] = codebook.merge_threshold;
    j["rng_seed"] = codebook.rng_seed;
    j["initial_k"] = codebook.initial_k;
    j["objective_trace"] = codebook.objective_trace;
    return j;
}

TextonCodebook codebook_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != kCodebookVersion) {
            throw InputError("unsupported codebook version");
        }
        TextonCodebook book;
        book.n_orientations = j.at("n_orientations").get<int>();
        book.n_scales = j.at("n_scales").get<int>();
        book.gabor = j.value("gabor", GaborParams{});
        book.centroids = j.at("centroids").get<std::vector<std::vector<float>>>();
        book.counts = j.value("counts", std::vector<std::int64_t>(book.centroids.size(), 0));
        book.merge_threshold = j.at("merge_threshold").get<double>();
        book.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        book.initial_k = j.value("initial_k", static_cast<int>(book.centroids.size()));
        book.objective_trace = j.value("objective_trace", std::vector<double>{});
        if (book.centroids.empty()) throw InputError("codebook has no centroids");
        for (const auto& c : book.centroids) {
            if (static_cast<int>(c.size()) != book.dimension()) {
                throw InputError("codebook centroid dimension mismatch");
            }
        }
        if (book.gabor.n_orientations != book.n_orientations || book.gabor.n_scales != book.n_scales) {
            throw InputError("codebook Gabor parameters disagree with its layout");
        }
        return book;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed codebook: ") + e.what());
    }
}

}  // namespace texmark::texture
