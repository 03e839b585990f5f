// freqpriv: frequency-enhanced small-object detection experiments on
// synthetic privacy-like scenes.
//
// Subcommands: gradcheck | synth | stats | train | eval | ablate.
// Exit codes: 0 ok, 1 usage, 2 validation/input, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "freqpriv/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace freqpriv;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& out_dir) {
    write_text(fs::path(out_dir) / "resolved_config.txt", resolved_config_text(cfg));
}

std::string trace_csv(const std::vector<StepTrace>& trace) {
    std::string out = "step,total,det,freq_term,matched_pairs\n";
    for (const auto& t : trace) {
        out += std::to_string(t.step) + "," + json(t.total).dump() + "," +
               json(t.det).dump() + "," + json(t.freq_term).dump() + "," +
               std::to_string(t.matched_pairs) + "\n";
    }
    return out;
}

json metrics_json(const EvalResult& r) {
    auto opt = [](const std::optional<double>& v) {
        return v.has_value() ? json(*v) : json(nullptr);
    };
    json out;
    out["ap"] = opt(r.ap);
    out["ap50"] = opt(r.ap50);
    out["ap75"] = opt(r.ap75);
    out["ap_s"] = opt(r.ap_s);
    out["ap_m"] = opt(r.ap_m);
    out["ap_l"] = opt(r.ap_l);
    out["f1"] = opt(r.f1);
    json per_class = json::object();
    for (const auto& [c, ap] : r.per_class_ap50) per_class[std::to_string(c)] = ap;
    out["per_class_ap50"] = per_class;
    return out;
}

int cmd_gradcheck(const std::string& out_dir) {
    const auto checks = run_op_gradchecks();
    bool all_pass = true;
    std::string csv = "op,max_rel_err,status\n";
    for (const auto& c : checks) {
        std::printf("%-24s %12.3e  %s\n", c.name.c_str(), c.max_rel_err,
                    c.pass ? "PASS" : "FAIL");
        csv += c.name + "," + json(c.max_rel_err).dump() + "," +
               (c.pass ? "pass" : "fail") + "\n";
        all_pass = all_pass && c.pass;
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(fs::path(out_dir) / "gradcheck.csv", csv);
    }
    if (!all_pass) {
        std::cerr << "gradcheck: at least one op exceeded the 1e-4 tolerance\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir, bool ppm) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const SynthDataset ds =
        generate_dataset(scene_config_from(cfg, cfg.seed), cfg.n_images);
    fs::create_directories(out_dir);
    write_dataset(ds, out_dir, ppm);
    write_resolved_config(cfg, out_dir);
    std::cout << "wrote " << ds.images.size() << " images, "
              << ds.annotations.annotations.size() << " objects ("
              << ds.objects_skipped << " skipped placements) to " << out_dir << "\n";
    return 0;
}

int cmd_stats(const std::string& annotations_path, std::string images_dir,
              const std::string& out_dir, const std::string& face_ids_csv) {
    const AnnotationSet set = load_annotations(annotations_path);
    if (images_dir.empty()) {
        images_dir = (fs::path(annotations_path).parent_path() / "images").string();
    }
    std::map<int, Raster> rasters;
    int missing = 0;
    for (const auto& img : set.images) {
        const fs::path p = fs::path(images_dir) / img.file_name;
        if (fs::exists(p)) {
            rasters[img.id] = read_pgm(p.string());
        } else {
            ++missing;
        }
    }

    std::set<int> face_ids;
    if (!face_ids_csv.empty()) {
        std::stringstream ss(face_ids_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) face_ids.insert(std::stoi(item));
        }
    } else {
        for (const auto& c : set.categories) {
            if (c.id % 2 == 1) face_ids.insert(c.id);  // synth convention
        }
    }

    const StatsReport report = compute_stats(set, rasters, face_ids);
    write_stats_outputs(report, out_dir);

    std::cout << "images: " << report.n_images << "\n"
              << "instances: " << report.n_instances << "\n"
              << "cv: " << report.cv << "\n"
              << "top20: " << report.top20 << "\n"
              << "violations: " << set.violations.size() << "\n";
    for (const auto& v : set.violations) std::cout << "  " << v << "\n";
    if (missing > 0) {
        std::cout << "note: " << missing
                  << " image files missing; contrast rows omitted for them\n";
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const LoadedDataset data = load_dataset_dir(data_dir);

    DetectorModel model = make_model(
        model_config_from(cfg, cfg.variant, derive_seed(cfg.seed, 303)));
    const TrainResult tr = train(model, data.samples,
                                 train_config_from(cfg, cfg.variant, derive_seed(cfg.seed, 404)));

    fs::create_directories(out_dir);
    save_checkpoint(model, (fs::path(out_dir) / "checkpoint.bin").string());
    write_text(fs::path(out_dir) / "loss_trace.csv", trace_csv(tr.trace));
    write_resolved_config(cfg, out_dir);
    std::cout << "trained variant " << variant_name(cfg.variant) << " for "
              << tr.steps << " steps; final loss " << tr.trace.back().total << "\n";
    return 0;
}

std::vector<Instance> read_predictions_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Instance> preds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Instance inst;
        inst.image_id = j.at("image_id").get<int>();
        inst.box.class_id = j.at("category_id").get<int>();
        const auto& bb = j.at("bbox");
        inst.box.x = bb[0].get<double>();
        inst.box.y = bb[1].get<double>();
        inst.box.w = bb[2].get<double>();
        inst.box.h = bb[3].get<double>();
        inst.box.score = j.at("score").get<double>();
        preds.push_back(inst);
    }
    return preds;
}

int cmd_eval(const std::string& model_path, const std::string& predictions_path,
             const std::string& data_dir, const std::string& out_dir,
             double score_threshold) {
    const LoadedDataset data = load_dataset_dir(data_dir);

    std::vector<Instance> preds;
    EvalResult result;
    if (!predictions_path.empty()) {
        preds = read_predictions_jsonl(predictions_path);
        std::vector<Instance> gts;
        for (size_t i = 0; i < data.samples.size(); ++i) {
            for (const BBox& b : data.samples[i].gt) gts.push_back({data.image_ids[i], b});
        }
        result = evaluate_detections(preds, gts);
    } else {
        const DetectorModel model = load_checkpoint(model_path);
        result = evaluate_model(model, data, score_threshold, &preds);
    }

    fs::create_directories(out_dir);
    std::string jsonl;
    for (const auto& p : preds) {
        jsonl += json{{"image_id", p.image_id},
                      {"category_id", p.box.class_id},
                      {"bbox", {p.box.x, p.box.y, p.box.w, p.box.h}},
                      {"score", p.box.score}}
                     .dump() +
                 "\n";
    }
    write_text(fs::path(out_dir) / "predictions.jsonl", jsonl);
    const json metrics = metrics_json(result);
    write_text(fs::path(out_dir) / "metrics.json", metrics.dump(2) + "\n");
    std::string csv = "metric,value\n";
    for (const auto& [k, v] : metrics.items()) {
        if (k == "per_class_ap50") continue;
        csv += k + "," + (v.is_null() ? "absent" : v.dump()) + "\n";
    }
    write_text(fs::path(out_dir) / "metrics.csv", csv);
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               std::vector<std::uint64_t> seeds) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    if (seeds.empty()) seeds = cfg.seeds;

    const AblationTable table = run_ablation(cfg, seeds);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "ablation.csv", ablation_csv(table));
    write_resolved_config(cfg, out_dir);
    for (const auto& cell : table.cells) {
        const fs::path cell_dir = fs::path(out_dir) / "cells" /
                                  (std::string(variant_name(cell.variant)) + "_seed" +
                                   std::to_string(cell.seed));
        fs::create_directories(cell_dir);
        if (cell.failed) {
            write_text(cell_dir / "failed.txt", cell.error + "\n");
            continue;
        }
        write_text(cell_dir / "loss_trace.csv", trace_csv(cell.trace));
        std::ofstream ckpt(cell_dir / "checkpoint.bin", std::ios::binary | std::ios::trunc);
        ckpt.write(cell.checkpoint.data(),
                   static_cast<std::streamsize>(cell.checkpoint.size()));
    }

    std::cout << ablation_csv(table);
    bool any_failed = false;
    for (const auto& cell : table.cells) any_failed = any_failed || cell.failed;
    return any_failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-enhanced detection experiments on synthetic scenes"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, model_path, annotations_path;
    std::string images_dir, face_ids;
    std::vector<std::uint64_t> seeds;
    bool ppm = false;
    double score_threshold = 0.05;

    auto* sc_grad = app.add_subcommand("gradcheck", "finite-difference check of every op");
    sc_grad->add_option("--out", out_dir, "directory for gradcheck.csv");

    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    sc_synth->add_option("--config", config_path, "experiment config")->required();
    sc_synth->add_option("--out", out_dir, "output dataset directory")->required();
    sc_synth->add_flag("--ppm", ppm, "also write 3-channel PPM images");

    auto* sc_stats = app.add_subcommand("stats", "dataset statistics report");
    sc_stats->add_option("--annotations", annotations_path, "annotations JSON")->required();
    sc_stats->add_option("--images", images_dir, "image directory (default: sibling images/)");
    sc_stats->add_option("--out", out_dir, "output directory")->required();
    sc_stats->add_option("--face-ids", face_ids, "comma-separated face category ids");

    auto* sc_train = app.add_subcommand("train", "train a detector");
    sc_train->add_option("--config", config_path, "experiment config")->required();
    sc_train->add_option("--data", data_dir, "dataset directory")->required();
    sc_train->add_option("--out", out_dir, "output directory")->required();

    std::string predictions_path;
    auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint or predictions file");
    auto* model_opt = sc_eval->add_option("--model", model_path, "checkpoint file");
    sc_eval->add_option("--predictions", predictions_path,
                        "predictions JSONL (instead of a model)")
        ->excludes(model_opt);
    sc_eval->add_option("--data", data_dir, "dataset directory")->required();
    sc_eval->add_option("--out", out_dir, "output directory")->required();
    sc_eval->add_option("--score-threshold", score_threshold, "decode threshold");

    auto* sc_ablate = app.add_subcommand("ablate", "run the I-IV ablation ladder");
    sc_ablate->add_option("--config", config_path, "experiment config")->required();
    sc_ablate->add_option("--out", out_dir, "output directory")->required();
    sc_ablate->add_option("--seed", seeds, "seed (repeatable; default: config seeds)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sc_grad->parsed()) return cmd_gradcheck(out_dir);
        if (sc_synth->parsed()) return cmd_synth(config_path, out_dir, ppm);
        if (sc_stats->parsed())
            return cmd_stats(annotations_path, images_dir, out_dir, face_ids);
        if (sc_train->parsed()) return cmd_train(config_path, data_dir, out_dir);
        if (sc_eval->parsed()) {
            if (model_path.empty() && predictions_path.empty()) {
                std::cerr << "eval: either --model or --predictions is required\n";
                return 1;
            }
            return cmd_eval(model_path, predictions_path, data_dir, out_dir,
                            score_threshold);
        }
        if (sc_ablate->parsed()) return cmd_ablate(config_path, out_dir, seeds);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
