#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "texmark/error.hpp"
#include "texmark/pipeline.hpp"
#include "texmark/synthbench.hpp"

namespace fs = std::filesystem;
using namespace texmark;
using nlohmann::json;

namespace {

pipeline::PipelineConfig config_or_default(const std::string& path) {
    return path.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(path);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(1) << '\n';
    } else {
        pipeline::save_json(j, out);
    }
}

json run_bench(const fs::path& scene_path, const fs::path& distort_path, const pipeline::PipelineConfig& config,
               const std::string& out_dir) {
    const auto spec = read_json(scene_path).get<synthbench::SceneSpec>();
    const auto dspec = read_json(distort_path).get<synthbench::DistortionSpec>();
    const auto scene = synthbench::render_scene(spec);
    const auto moved = synthbench::distort(scene.image, scene.labels, dspec);

    const auto codebook = pipeline::build_codebook(std::vector<GrayImage>{scene.image, moved.image}, config);
    auto da = pipeline::detect_image(scene.image, codebook, config, "a");
    auto db = pipeline::detect_image(moved.image, codebook, config, "b");

    std::vector<int> compact;
    for (int k = 0; k < scene.n_structures(); ++k) {
        if (scene.kinds[static_cast<std::size_t>(k)] != synthbench::ShapeKind::HalfOpen) compact.push_back(k);
    }
    std::vector<std::vector<std::uint8_t>> masks;
    for (const auto* l : da.result.of_kind(matching::LandmarkKind::Closed)) {
        masks.push_back(synthbench::landmark_mask(*l, da.superpixels));
    }
    const auto det = synthbench::score_detection(masks, scene.labels, compact);

    std::vector<matching::LandmarkMatch> matches;
    const json report = pipeline::match_sections(da.result, db.result, config.match_weights(), true, &matches);
    std::vector<synthbench::LandmarkTruth> ta, tb;
    for (const auto& l : da.result.landmarks) ta.push_back(synthbench::landmark_truth(l, da.superpixels, scene.labels));
    for (const auto& l : db.result.landmarks) tb.push_back(synthbench::landmark_truth(l, db.superpixels, moved.labels));
    const auto ms = synthbench::score_matching(matches, ta, tb, scene.n_structures());

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_gray_png(fs::path(out_dir) / "a.png", scene.image);
        write_gray_png(fs::path(out_dir) / "b.png", moved.image);
        pipeline::save_json(pipeline::result_to_json(da.result), fs::path(out_dir) / "a.json");
        pipeline::save_json(pipeline::result_to_json(db.result), fs::path(out_dir) / "b.json");
        pipeline::save_json(report, fs::path(out_dir) / "matches.json");
    }
    return {{"version", 1},
            {"detection",
             {{"planted", det.n_planted},
              {"recovered", det.n_recovered},
              {"recall", det.recall},
              {"precision", det.precision},
              {"best_iou", det.best_iou}}},
            {"matching",
             {{"matches", ms.n_matches},
              {"correct", ms.correct},
              {"partial", ms.partial},
              {"wrong", ms.wrong},
              {"no_matches", ms.no_matches},
              {"structures", ms.n_structures},
              {"structures_matched", ms.structures_matched}}}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Texture landmark detection and cross-section matching"};
    app.require_subcommand(1);

    std::vector<std::string> cb_images;
    std::string cb_out, config_path;
    auto* cb = app.add_subcommand("codebook", "Learn a shared texton codebook from images");
    cb->add_option("images", cb_images, "Input images")->required();
    cb->add_option("--out", cb_out, "Output codebook JSON")->required();
    cb->add_option("--config", config_path, "Pipeline config JSON");

    std::string det_image, det_codebook, det_out, det_cache, det_votes, det_proposals;
    auto* det = app.add_subcommand("detect", "Detect region and boundary landmarks in one section");
    det->add_option("image", det_image, "Section image")->required();
    det->add_option("--codebook", det_codebook, "Codebook JSON")->required();
    det->add_option("--config", config_path, "Pipeline config JSON");
    det->add_option("--out", det_out, "Output result JSON (stdout when omitted)");
    det->add_option("--cache", det_cache, "Cache directory for intermediate results");
    det->add_option("--vote-map", det_votes, "Write the boundary vote map PNG");
    det->add_option("--proposals", det_proposals, "Write region proposals as JSON lines");

    std::string m_a, m_b, m_out;
    bool no_location = false;
    auto* mt = app.add_subcommand("match", "Match landmarks between two detected sections");
    mt->add_option("a", m_a, "First section result")->required();
    mt->add_option("b", m_b, "Second section result")->required();
    mt->add_flag("--no-location", no_location, "Drop the centroid proximity term");
    mt->add_option("--config", config_path, "Pipeline config JSON (match weights)");
    mt->add_option("--out", m_out, "Output match report (stdout when omitted)");

    std::string b_scene, b_distort, b_out, b_dir;
    auto* bn = app.add_subcommand("bench", "Run detection and matching on a synthetic scene pair");
    bn->add_option("scene", b_scene, "Scene spec JSON")->required();
    bn->add_option("distortion", b_distort, "Distortion spec JSON")->required();
    bn->add_option("--config", config_path, "Pipeline config JSON");
    bn->add_option("--out", b_out, "Summary JSON (stdout when omitted)");
    bn->add_option("--save", b_dir, "Directory for rendered images, results and matches");

    std::string o_image, o_json, o_second, o_out;
    auto* ov = app.add_subcommand("overlay", "Draw landmarks or matches over images");
    ov->add_option("image", o_image, "Section image")->required();
    ov->add_option("json", o_json, "Section result or match report")->required();
    ov->add_option("--second-image", o_second, "Image of section b (match reports)");
    ov->add_option("--out", o_out, "Output PNG (match reports: prefix)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cb) {
            const auto config = config_or_default(config_path);
            std::vector<fs::path> paths(cb_images.begin(), cb_images.end());
            pipeline::save_codebook(pipeline::build_codebook(paths, config), cb_out);
        } else if (*det) {
            const auto config = config_or_default(config_path);
            const auto codebook = pipeline::load_codebook(det_codebook);
            if (!det_votes.empty() || !det_proposals.empty()) {
                const auto image = read_gray_image(det_image);
                auto d = pipeline::detect_image(image, codebook, config, fs::path(det_image).stem().string());
                d.result.image_hash = pipeline::file_sha256(det_image);
                if (!det_votes.empty()) {
                    write_gray_png(det_votes, boundaries::vote_map(d.votes, d.graph, image.width, image.height));
                }
                if (!det_proposals.empty()) {
                    std::ofstream out(det_proposals);
                    if (!out) throw InputError("cannot write " + det_proposals);
                    regions::write_proposals_jsonl(out, d.proposals);
                }
                emit(pipeline::result_to_json(d.result), det_out);
            } else {
                pipeline::DetectOptions opt;
                if (!det_cache.empty()) opt.cache_dir = det_cache;
                const auto outcome = pipeline::detect(det_image, codebook, config, opt);
                emit(pipeline::result_to_json(outcome.result), det_out);
            }
        } else if (*mt) {
            const auto config = config_or_default(config_path);
            const auto a = pipeline::load_result(m_a);
            const auto b = pipeline::load_result(m_b);
            emit(pipeline::match_sections(a, b, config.match_weights(), no_location), m_out);
        } else if (*bn) {
            emit(run_bench(b_scene, b_distort, config_or_default(config_path), b_dir), b_out);
        } else if (*ov) {
            const auto image = read_gray_image(o_image);
            const json j = read_json(o_json);
            if (j.contains("pairs")) {
                if (o_second.empty()) throw InputError("match report overlays need --second-image");
                const auto second = read_gray_image(o_second);
                const fs::path prefix(o_out);
                const fs::path stem = prefix.parent_path() / prefix.stem();
                pipeline::render_match_overlay(image, second, j, stem.string() + "_a.png", stem.string() + "_b.png");
            } else {
                pipeline::render_result_overlay(image, pipeline::result_from_json(j), o_out);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const CompatibilityError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const SpecError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
