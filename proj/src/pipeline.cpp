#include "texmark/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "texmark/error.hpp"

namespace texmark::pipeline {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw ConfigError("unknown config key '" + where + "." + k + "'");
    }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

json section_of(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

matching::MatchWeights PipelineConfig::match_weights() const {
    matching::MatchWeights w = match;
    w.tolerance_px = tolerance_px();
    return w;
}

json config_to_json(const PipelineConfig& c) {
    json merge = c.merge_threshold ? json(*c.merge_threshold) : json(nullptr);
    return {{"version", 1},
            {"gabor", c.gabor},
            {"codebook",
             {{"samples_per_image", c.samples_per_image},
              {"initial_k", c.initial_k},
              {"merge_threshold", merge},
              {"merge_factor", c.merge_factor},
              {"iterations", c.kmeans_iterations}}},
            {"superpixels",
             {{"area", c.superpixel_area},
              {"compactness", c.compactness},
              {"smoothing_sigma", c.smoothing_sigma},
              {"iterations", c.slic_iterations},
              {"min_area_fraction", c.min_area_fraction}}},
            {"regions",
             {{"weights",
               {{"contrast", c.significance.contrast},
                {"coherence", c.significance.coherence},
                {"compactness", c.significance.compactness},
                {"compactness_clamp", c.significance.compactness_clamp},
                {"sample_area", c.significance.sample_area}}},
              {"max_area_fraction", c.max_area_fraction},
              {"cluster_cut", c.proposal_cut},
              {"min_cluster_size", c.min_cluster_size}}},
            {"boundaries", {{"vote_percentile", c.vote_percentile}, {"group_cut", c.segment_cut}}},
            {"landmarks",
             {{"coincide_threshold", c.coincide_threshold}, {"top_closed", c.top_closed}, {"top_open", c.top_open}}},
            {"matching",
             {{"w_int", c.match.w_int},
              {"w_shape", c.match.w_shape},
              {"w_ext", c.match.w_ext},
              {"w_loc", c.match.w_loc},
              {"tolerance_mm", c.tolerance_mm},
              {"normalized_exterior", c.match.normalized_exterior},
              {"max_points", c.match.max_points},
              {"shape",
               {{"n_r", c.match.shape.n_r},
                {"n_theta", c.match.shape.n_theta},
                {"r_inner", c.match.shape.r_inner},
                {"r_outer", c.match.shape.r_outer},
                {"tangent_normalize", c.match.shape.tangent_normalize}}}}},
            {"microns_per_pixel", c.microns_per_pixel},
            {"rng_seed", c.rng_seed}};
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    check_keys(j, {"version", "gabor", "codebook", "superpixels", "regions", "boundaries", "landmarks", "matching",
                   "microns_per_pixel", "rng_seed"},
               "config");
    if (j.value("version", 1) != 1) throw ConfigError("unsupported config version");

    const json g = section_of(j, "gabor");
    check_keys(g, {"n_orientations", "n_scales", "base_frequency", "frequency_ratio", "bandwidth", "truncation"},
               "gabor");
    read_key(g, "n_orientations", c.gabor.n_orientations);
    read_key(g, "n_scales", c.gabor.n_scales);
    read_key(g, "base_frequency", c.gabor.base_frequency);
    read_key(g, "frequency_ratio", c.gabor.frequency_ratio);
    read_key(g, "bandwidth", c.gabor.bandwidth);
    read_key(g, "truncation", c.gabor.truncation);

    const json cb = section_of(j, "codebook");
    check_keys(cb, {"samples_per_image", "initial_k", "merge_threshold", "merge_factor", "iterations"}, "codebook");
    read_key(cb, "samples_per_image", c.samples_per_image);
    read_key(cb, "initial_k", c.initial_k);
    if (cb.contains("merge_threshold") && !cb.at("merge_threshold").is_null()) {
        double t = 0.0;
        read_key(cb, "merge_threshold", t);
        c.merge_threshold = t;
    }
    read_key(cb, "merge_factor", c.merge_factor);
    read_key(cb, "iterations", c.kmeans_iterations);

    const json sp = section_of(j, "superpixels");
    check_keys(sp, {"area", "compactness", "smoothing_sigma", "iterations", "min_area_fraction"}, "superpixels");
    read_key(sp, "area", c.superpixel_area);
    read_key(sp, "compactness", c.compactness);
    read_key(sp, "smoothing_sigma", c.smoothing_sigma);
    read_key(sp, "iterations", c.slic_iterations);
    read_key(sp, "min_area_fraction", c.min_area_fraction);

    const json rg = section_of(j, "regions");
    check_keys(rg, {"weights", "max_area_fraction", "cluster_cut", "min_cluster_size"}, "regions");
    const json w = section_of(rg, "weights");
    check_keys(w, {"contrast", "coherence", "compactness", "compactness_clamp", "sample_area"}, "regions.weights");
    read_key(w, "contrast", c.significance.contrast);
    read_key(w, "coherence", c.significance.coherence);
    read_key(w, "compactness", c.significance.compactness);
    read_key(w, "compactness_clamp", c.significance.compactness_clamp);
    read_key(w, "sample_area", c.significance.sample_area);
    read_key(rg, "max_area_fraction", c.max_area_fraction);
    read_key(rg, "cluster_cut", c.proposal_cut);
    read_key(rg, "min_cluster_size", c.min_cluster_size);

    const json bd = section_of(j, "boundaries");
    check_keys(bd, {"vote_percentile", "group_cut"}, "boundaries");
    read_key(bd, "vote_percentile", c.vote_percentile);
    read_key(bd, "group_cut", c.segment_cut);

    const json lm = section_of(j, "landmarks");
    check_keys(lm, {"coincide_threshold", "top_closed", "top_open"}, "landmarks");
    read_key(lm, "coincide_threshold", c.coincide_threshold);
    read_key(lm, "top_closed", c.top_closed);
    read_key(lm, "top_open", c.top_open);

    const json m = section_of(j, "matching");
    check_keys(m, {"w_int", "w_shape", "w_ext", "w_loc", "tolerance_mm", "normalized_exterior", "max_points", "shape"},
               "matching");
    read_key(m, "w_int", c.match.w_int);
    read_key(m, "w_shape", c.match.w_shape);
    read_key(m, "w_ext", c.match.w_ext);
    read_key(m, "w_loc", c.match.w_loc);
    read_key(m, "tolerance_mm", c.tolerance_mm);
    read_key(m, "normalized_exterior", c.match.normalized_exterior);
    read_key(m, "max_points", c.match.max_points);
    const json sh = section_of(m, "shape");
    check_keys(sh, {"n_r", "n_theta", "r_inner", "r_outer", "tangent_normalize"}, "matching.shape");
    read_key(sh, "n_r", c.match.shape.n_r);
    read_key(sh, "n_theta", c.match.shape.n_theta);
    read_key(sh, "r_inner", c.match.shape.r_inner);
    read_key(sh, "r_outer", c.match.shape.r_outer);
    read_key(sh, "tangent_normalize", c.match.shape.tangent_normalize);

    read_key(j, "microns_per_pixel", c.microns_per_pixel);
    read_key(j, "rng_seed", c.rng_seed);
    c.match.tolerance_px = c.tolerance_px();
    validate(c);
    return c;
}

void validate(const PipelineConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    const auto& g = c.gabor;
    require(g.n_orientations >= 1 && g.n_scales >= 1, "gabor counts must be >= 1");
    require(g.base_frequency > 0.0 && g.base_frequency <= 0.5, "gabor.base_frequency must lie in (0, 0.5]");
    require(g.frequency_ratio > 1.0, "gabor.frequency_ratio must exceed 1");
    require(g.bandwidth > 0.0 && g.truncation > 0.0, "gabor bandwidth and truncation must be positive");
    require(c.samples_per_image >= 1, "codebook.samples_per_image must be >= 1");
    require(c.initial_k >= 1, "codebook.initial_k must be >= 1");
    require(!c.merge_threshold || *c.merge_threshold >= 0.0, "codebook.merge_threshold must be >= 0");
    require(c.merge_factor >= 0.0 && c.kmeans_iterations >= 1, "codebook merge_factor/iterations out of range");
    require(c.superpixel_area >= 1.0 && c.compactness > 0.0, "superpixel area and compactness must be positive");
    require(c.smoothing_sigma >= 0.0 && c.slic_iterations >= 1, "superpixel smoothing/iterations out of range");
    require(c.min_area_fraction >= 0.0 && c.min_area_fraction < 1.0, "superpixels.min_area_fraction must lie in [0, 1)");
    require(std::isfinite(c.significance.contrast) && std::isfinite(c.significance.coherence) &&
                std::isfinite(c.significance.compactness) && std::isfinite(c.significance.compactness_clamp),
            "significance weights must be finite");
    require(c.significance.sample_area >= 1.0 && std::isfinite(c.significance.sample_area),
            "regions.weights.sample_area must be >= 1");
    require(c.max_area_fraction > 0.0 && c.max_area_fraction <= 1.0, "regions.max_area_fraction must lie in (0, 1]");
    require(c.proposal_cut >= 0.0 && c.proposal_cut <= 1.0, "regions.cluster_cut must lie in [0, 1]");
    require(c.min_cluster_size >= 1, "regions.min_cluster_size must be >= 1");
    require(c.vote_percentile >= 0.0 && c.vote_percentile <= 1.0, "boundaries.vote_percentile must lie in [0, 1]");
    require(c.segment_cut >= 0.0 && c.segment_cut <= 1.0, "boundaries.group_cut must lie in [0, 1]");
    require(c.coincide_threshold >= 0.0 && c.coincide_threshold <= 1.0,
            "landmarks.coincide_threshold must lie in [0, 1]");
    require(c.top_closed >= 0 && c.top_open >= 0, "landmark top-k counts must be >= 0");
    const auto& m = c.match;
    require(std::isfinite(m.w_int) && std::isfinite(m.w_shape) && std::isfinite(m.w_ext) && std::isfinite(m.w_loc),
            "match weights must be finite");
    require(c.tolerance_mm >= 0.0 && c.microns_per_pixel > 0.0, "tolerance_mm >= 0 and microns_per_pixel > 0");
    require(m.max_points >= 2, "matching.max_points must be >= 2");
    require(m.shape.n_r >= 1 && m.shape.n_theta >= 1 && m.shape.r_inner > 0.0 && m.shape.r_outer > m.shape.r_inner,
            "matching.shape binning out of range");
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json(json::parse(ss.str()));
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string config_hash(const PipelineConfig& c) { return sha256_hex(config_to_json(c).dump()); }

std::string codebook_hash(const texture::TextonCodebook& cb) {
    return sha256_hex(texture::codebook_to_json(cb).dump());
}

texture::TextonCodebook build_codebook(const std::vector<GrayImage>& images, const PipelineConfig& config) {
    validate(config);
    if (images.empty()) throw ParameterError("codebook needs at least one image");
    const texture::GaborBank bank = texture::build_gabor_bank(config.gabor);
    texture::FeatureSample pooled;
    pooled.dimension = bank.dimension();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto field = texture::apply_bank(images[i], bank);
        pooled.append(texture::sample_aligned_features(field, config.samples_per_image, config.rng_seed + i));
    }
    texture::CodebookOptions opt;
    opt.initial_k = config.initial_k;
    opt.merge_threshold = config.merge_threshold;
    opt.merge_factor = config.merge_factor;
    opt.max_iterations = config.kmeans_iterations;
    opt.rng_seed = config.rng_seed;
    auto cb = texture::learn_codebook(pooled, bank.n_orientations(), bank.n_scales(), opt);
    cb.gabor = config.gabor;
    return cb;
}

texture::TextonCodebook build_codebook(const std::vector<std::filesystem::path>& paths, const PipelineConfig& config) {
    std::vector<GrayImage> images;
    images.reserve(paths.size());
    for (const auto& p : paths) images.push_back(read_gray_image(p));
    return build_codebook(images, config);
}

texture::TextonCodebook load_codebook(const std::filesystem::path& path) {
    return texture::codebook_from_json(parse_json_file(path));
}

void save_codebook(const texture::TextonCodebook& cb, const std::filesystem::path& path) {
    save_json(texture::codebook_to_json(cb), path);
}

std::vector<const matching::Landmark*> SectionResult::of_kind(matching::LandmarkKind kind) const {
    std::vector<const matching::Landmark*> out;
    for (const auto& l : landmarks) {
        if (l.kind == kind) out.push_back(&l);
    }
    return out;
}

json result_to_json(const SectionResult& r) {
    json closed = json::array(), open = json::array();
    for (const auto& l : r.landmarks) {
        (l.kind == matching::LandmarkKind::Closed ? closed : open).push_back(matching::landmark_to_json(l));
    }
    return {{"version", kSectionResultVersion},
            {"section", r.section},
            {"image", {{"width", r.width}, {"height", r.height}}},
            {"superpixels", {{"count", r.n_superpixels}, {"mean_diameter", r.superpixel_diameter}}},
            {"provenance",
             {{"config_hash", r.config_hash}, {"codebook_hash", r.codebook_hash}, {"image_hash", r.image_hash}}},
            {"config", r.config},
            {"closed", closed},
            {"open", open}};
}

SectionResult result_from_json(const json& j) {
    try {
        if (j.at("version").get<int>() != kSectionResultVersion) throw InputError("unsupported result version");
        SectionResult r;
        r.section = j.at("section").get<std::string>();
        r.width = j.at("image").at("width").get<int>();
        r.height = j.at("image").at("height").get<int>();
        r.n_superpixels = j.at("superpixels").at("count").get<int>();
        r.superpixel_diameter = j.at("superpixels").at("mean_diameter").get<double>();
        r.config_hash = j.at("provenance").at("config_hash").get<std::string>();
        r.codebook_hash = j.at("provenance").at("codebook_hash").get<std::string>();
        r.image_hash = j.at("provenance").at("image_hash").get<std::string>();
        r.config = j.at("config");
        for (const char* key : {"closed", "open"}) {
            for (const auto& l : j.at(key)) r.landmarks.push_back(matching::landmark_from_json(l));
        }
        for (std::size_t i = 0; i < r.landmarks.size(); ++i) {
            if (r.landmarks[i].id != static_cast<int>(i)) throw InputError("landmark ids are not sequential");
        }
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed section result: ") + e.what());
    }
}

SectionResult load_result(const std::filesystem::path& path) { return result_from_json(parse_json_file(path)); }

void save_json(const json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

Detection detect_image(const GrayImage& image, const texture::TextonCodebook& codebook, const PipelineConfig& config,
                       const std::string& section) {
    validate(config);
    image.validate();
    Detection d;
    d.result.section = section;
    d.result.width = image.width;
    d.result.height = image.height;
    d.result.config = config_to_json(config);
    d.result.config_hash = config_hash(config);
    d.result.codebook_hash = codebook_hash(codebook);

    const texture::GaborBank bank = texture::build_gabor_bank(codebook.gabor);
    const auto field = texture::apply_bank(image, bank);
    d.textons = texture::assign_textons(field, codebook);

    // Superpixels cover only pixels that carry a texton.
    GrayImage masked = image;
    masked.foreground = field.mask;
    const auto fg = static_cast<double>(masked.foreground_count());
    if (fg < 1.0) throw InputError("image has no usable foreground away from the border");
    segmentation::SlicParams sp;
    sp.target_count = std::max(1, static_cast<int>(std::lround(fg / config.superpixel_area)));
    sp.compactness = config.compactness;
    sp.smoothing_sigma = config.smoothing_sigma;
    sp.iterations = config.slic_iterations;
    sp.min_area_fraction = config.min_area_fraction;
    sp.rng_seed = config.rng_seed;
    d.superpixels = segmentation::slic(masked, sp);
    d.graph = segmentation::build_adjacency(d.superpixels);
    d.histograms = stats::superpixel_histograms(d.textons, d.superpixels);
    d.result.n_superpixels = d.superpixels.n_superpixels;
    d.result.superpixel_diameter = d.superpixels.mean_diameter();

    regions::GrowthOptions growth;
    growth.max_area_fraction = config.max_area_fraction;
    growth.weights = config.significance;
    d.proposals = regions::grow_all(d.graph, d.histograms, d.superpixels.areas, growth);

    std::vector<matching::Landmark> closed;
    if (!d.proposals.empty()) {
        const auto clusters = regions::cluster_proposals(d.proposals, config.proposal_cut,
                                                         static_cast<std::size_t>(config.min_cluster_size));
        for (const auto& c : clusters) {
            if (static_cast<int>(closed.size()) >= config.top_closed) break;
            auto l = matching::closed_landmark(d.proposals[c.representative], d.graph, d.histograms);
            if (l.segments.size() < 2) continue;
            closed.push_back(std::move(l));
        }
    }

    d.votes = boundaries::vote_boundaries(d.proposals, d.histograms, d.graph);
    d.surviving = boundaries::threshold_segments(d.votes, boundaries::vote_percentile(d.votes, config.vote_percentile));
    d.groups = boundaries::group_segments(d.surviving, d.graph, config.segment_cut);
    std::vector<matching::Landmark> open;
    for (const auto& g : d.groups) {
        if (g.segments.size() < 2) continue;
        open.push_back(matching::open_landmark(g, d.histograms));
    }

    auto unified = matching::unify_landmarks(std::move(closed), std::move(open), config.coincide_threshold);
    std::vector<matching::Landmark> kept;
    for (auto& l : unified) {
        if (l.kind == matching::LandmarkKind::Open && l.rank >= config.top_open) continue;
        l.id = static_cast<int>(kept.size());
        kept.push_back(std::move(l));
    }
    d.result.landmarks = std::move(kept);
    return d;
}

DetectOutcome detect(const std::filesystem::path& image_path, const texture::TextonCodebook& codebook,
                     const PipelineConfig& config, const DetectOptions& options) {
    const std::string bytes = read_file(image_path);
    const std::string image_hash = sha256_hex(bytes);
    const std::string cfg_hash = config_hash(config);
    const std::string cb_hash = codebook_hash(codebook);
    const std::string key = sha256_hex(image_hash + cfg_hash + cb_hash);
    const std::string section = image_path.stem().string();

    std::filesystem::path entry;
    if (options.cache_dir) {
        entry = *options.cache_dir / (key + ".json");
        if (std::filesystem::exists(entry)) {
            try {
                const auto j = json::parse(read_file(entry));
                if (j.at("key").get<std::string>() != key) throw InputError("cache key mismatch");
                SectionResult r = result_from_json(j.at("result"));
                r.section = section;
                return {std::move(r), true};
            } catch (const std::exception& e) {
                std::cerr << "warning: cache entry " << entry.string() << " is unusable (" << e.what()
                          << "); rebuilding\n";
            }
        }
    }

    const GrayImage image = read_gray_image(image_path);
    Detection d = detect_image(image, codebook, config, section);
    d.result.image_hash = image_hash;
    if (options.cache_dir) {
        std::filesystem::create_directories(*options.cache_dir);
        save_json(json{{"key", key}, {"result", result_to_json(d.result)}}, entry);
        segmentation::write_superpixel_map(d.superpixels, *options.cache_dir / (key + ".superpixels.png"),
                                           *options.cache_dir / (key + ".superpixels.json"));
    }
    return {std::move(d.result), false};
}

namespace {

json landmark_geometry(const matching::Landmark& l) {
    json mids = json::array();
    for (const auto& p : l.midpoints) mids.push_back({p.x, p.y});
    return {{"id", l.id}, {"kind", matching::to_string(l.kind)}, {"midpoints", mids}};
}

}  // namespace

json match_sections(const SectionResult& a, const SectionResult& b, matching::MatchWeights weights, bool no_location,
                    std::vector<matching::LandmarkMatch>* matches_out) {
    if (a.codebook_hash != b.codebook_hash) {
        throw CompatibilityError("sections were detected with different codebooks");
    }
    if (no_location) weights.w_loc = 0.0;
    std::vector<matching::LandmarkMatch> matches;
    if (!a.landmarks.empty() && !b.landmarks.empty()) {
        matches = matching::mutual_nearest_match(a.landmarks, b.landmarks, weights);
    }
    json report = matching::match_report(matches, weights);
    json geo_a = json::array(), geo_b = json::array();
    for (const auto& m : matches) {
        geo_a.push_back(landmark_geometry(a.landmarks[static_cast<std::size_t>(m.a)]));
        geo_b.push_back(landmark_geometry(b.landmarks[static_cast<std::size_t>(m.b)]));
    }
    report["sections"] = {{"a", {{"section", a.section}, {"landmarks", geo_a}}},
                          {"b", {{"section", b.section}, {"landmarks", geo_b}}}};
    report["no_location"] = no_location;
    report["codebook_hash"] = a.codebook_hash;
    if (matches_out) *matches_out = std::move(matches);
    return report;
}

namespace {

cv::Mat to_bgr(const GrayImage& image) {
    cv::Mat gray(image.height, image.width, CV_8U);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            gray.at<std::uint8_t>(y, x) =
                static_cast<std::uint8_t>(std::lround(std::clamp(image.at(x, y), 0.0f, 1.0f) * 255.0f));
        }
    }
    cv::Mat bgr;
    cv::cvtColor(gray, bgr, cv::COLOR_GRAY2BGR);
    return bgr;
}

cv::Scalar palette(int k) {
    static const cv::Scalar colors[] = {{40, 40, 230},  {40, 200, 40},  {230, 120, 30}, {30, 210, 230},
                                        {200, 40, 200}, {230, 230, 40}, {90, 90, 160},  {40, 140, 255},
                                        {160, 255, 90}, {255, 90, 150}};
    return colors[static_cast<std::size_t>(k) % std::size(colors)];
}

void draw_landmark(cv::Mat& img, const std::vector<PointF>& mids, bool closed, const cv::Scalar& color,
                   const std::string& label) {
    std::vector<cv::Point> pts;
    for (const auto& p : mids) pts.emplace_back(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
    if (pts.empty()) return;
    cv::polylines(img, pts, closed, color, 2, cv::LINE_AA);
    const PointF c = matching::mean_point(mids);
    cv::putText(img, label, {static_cast<int>(c.x), static_cast<int>(c.y)}, cv::FONT_HERSHEY_SIMPLEX, 0.7, color, 2);
}

void write_bgr(const cv::Mat& img, const std::filesystem::path& out) {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    if (!cv::imwrite(out.string(), img)) throw InputError("cannot write " + out.string());
}

std::vector<PointF> midpoints_of(const json& l) {
    std::vector<PointF> pts;
    for (const auto& p : l.at("midpoints")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return pts;
}

}  // namespace

void render_result_overlay(const GrayImage& image, const SectionResult& result, const std::filesystem::path& out) {
    if (result.landmarks.empty()) {
        write_gray_png(out, image);
        return;
    }
    cv::Mat img = to_bgr(image);
    for (const auto& l : result.landmarks) {
        const bool closed = l.kind == matching::LandmarkKind::Closed;
        const std::string label = (closed ? "" : "o") + std::to_string(l.rank + 1);
        draw_landmark(img, l.midpoints, closed, palette(closed ? l.rank : l.rank + 5), label);
    }
    write_bgr(img, out);
}

void render_match_overlay(const GrayImage& image_a, const GrayImage& image_b, const json& report,
                          const std::filesystem::path& out_a, const std::filesystem::path& out_b) {
    try {
        const auto& la = report.at("sections").at("a").at("landmarks");
        const auto& lb = report.at("sections").at("b").at("landmarks");
        if (la.empty()) {
            write_gray_png(out_a, image_a);
            write_gray_png(out_b, image_b);
            return;
        }
        cv::Mat a = to_bgr(image_a), b = to_bgr(image_b);
        for (std::size_t k = 0; k < la.size(); ++k) {
            const std::string label = std::to_string(k + 1);
            draw_landmark(a, midpoints_of(la[k]), la[k].at("kind") == "closed", palette(static_cast<int>(k)), label);
            draw_landmark(b, midpoints_of(lb[k]), lb[k].at("kind") == "closed", palette(static_cast<int>(k)), label);
        }
        write_bgr(a, out_a);
        write_bgr(b, out_b);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed match report: ") + e.what());
    }
}

}  // namespace texmark::pipeline
