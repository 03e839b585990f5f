#include "freqpriv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace freqpriv {

Variant parse_variant(const std::string& name) {
    if (name == "I") return Variant::I;
    if (name == "II") return Variant::II;
    if (name == "III") return Variant::III;
    if (name == "IV") return Variant::IV;
    throw ValidationError("variant must be one of I, II, III, IV; got '" + name + "'");
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::I: return "I";
        case Variant::II: return "II";
        case Variant::III: return "III";
        case Variant::IV: return "IV";
    }
    return "?";
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ValidationError("config: 'seeds' must list at least one seed");
    return out;
}

}  // namespace

ExperimentConfig parse_experiment_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": empty key or value");
        }

        try {
            if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "image_size") cfg.image_size = std::stoi(value);
            else if (key == "channels") cfg.channels = std::stoi(value);
            else if (key == "num_classes") cfg.num_classes = std::stoi(value);
            else if (key == "beta") cfg.beta = std::stod(value);
            else if (key == "lambda") cfg.lambda = std::stod(value);
            else if (key == "roi_size") cfg.roi_size = std::stoi(value);
            else if (key == "gate_init") cfg.gate_init = std::stod(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "momentum") cfg.momentum = std::stod(value);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "decode_threshold") cfg.decode_threshold = std::stod(value);
            else if (key == "match_iou") cfg.match_iou = std::stod(value);
            else if (key == "freq_warmup") cfg.freq_warmup = std::stoi(value);
            else if (key == "hflip") cfg.hflip = parse_bool(value, key);
            else if (key == "score_threshold") cfg.score_threshold = std::stod(value);
            else if (key == "variant") cfg.variant = parse_variant(value);
            else if (key == "n_images") cfg.n_images = std::stoi(value);
            else if (key == "n_train") cfg.n_train = std::stoi(value);
            else if (key == "n_test") cfg.n_test = std::stoi(value);
            else if (key == "objects_mean") cfg.objects_mean = std::stod(value);
            else if (key == "objects_max") cfg.objects_max = std::stoi(value);
            else if (key == "small_fraction") cfg.small_fraction = std::stod(value);
            else if (key == "contrast_lo") cfg.contrast_lo = std::stod(value);
            else if (key == "contrast_hi") cfg.contrast_hi = std::stod(value);
            else if (key == "zipf_s") cfg.zipf_s = std::stod(value);
            else if (key == "seeds") cfg.seeds = parse_seed_list(value);
            else if (key == "train_dir") cfg.train_dir = value;
            else if (key == "test_dir") cfg.test_dir = value;
            else if (key == "class_law") {
                if (value == "uniform") cfg.class_law = ClassLaw::Uniform;
                else if (value == "zipf") cfg.class_law = ClassLaw::Zipf;
                else throw ValidationError("config: class_law must be uniform or zipf");
            } else {
                throw ValidationError("config: unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError("config: bad value for key '" + key + "': " + value);
        } catch (const std::out_of_range&) {
            throw ValidationError("config: value out of range for key '" + key + "'");
        }
    }

    if (cfg.image_size < 8 || cfg.image_size % 4 != 0) {
        throw ValidationError("config: image_size must be >= 8 and divisible by 4");
    }
    if (cfg.num_classes < 1 || cfg.channels < 1 || cfg.roi_size < 1 ||
        cfg.epochs < 1 || cfg.batch_size < 1 || cfg.beta < 0.0 || cfg.lambda < 0.0) {
        throw ValidationError("config: invalid numeric settings");
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_experiment_config_text(text);
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
    using nlohmann::json;
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(cfg.seed);
    kv["image_size"] = std::to_string(cfg.image_size);
    kv["channels"] = std::to_string(cfg.channels);
    kv["num_classes"] = std::to_string(cfg.num_classes);
    kv["beta"] = json(cfg.beta).dump();
    kv["lambda"] = json(cfg.lambda).dump();
    kv["roi_size"] = std::to_string(cfg.roi_size);
    kv["gate_init"] = json(cfg.gate_init).dump();
    kv["lr"] = json(cfg.lr).dump();
    kv["momentum"] = json(cfg.momentum).dump();
    kv["weight_decay"] = json(cfg.weight_decay).dump();
    kv["epochs"] = std::to_string(cfg.epochs);
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["decode_threshold"] = json(cfg.decode_threshold).dump();
    kv["match_iou"] = json(cfg.match_iou).dump();
    kv["freq_warmup"] = std::to_string(cfg.freq_warmup);
    kv["hflip"] = cfg.hflip ? "true" : "false";
    kv["score_threshold"] = json(cfg.score_threshold).dump();
    kv["variant"] = variant_name(cfg.variant);
    kv["n_images"] = std::to_string(cfg.n_images);
    kv["n_train"] = std::to_string(cfg.n_train);
    kv["n_test"] = std::to_string(cfg.n_test);
    kv["objects_mean"] = json(cfg.objects_mean).dump();
    kv["objects_max"] = std::to_string(cfg.objects_max);
    kv["small_fraction"] = json(cfg.small_fraction).dump();
    kv["contrast_lo"] = json(cfg.contrast_lo).dump();
    kv["contrast_hi"] = json(cfg.contrast_hi).dump();
    kv["class_law"] = cfg.class_law == ClassLaw::Zipf ? "zipf" : "uniform";
    kv["zipf_s"] = json(cfg.zipf_s).dump();
    std::string seeds;
    for (size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) seeds += ",";
        seeds += std::to_string(cfg.seeds[i]);
    }
    kv["seeds"] = seeds;
    if (!cfg.train_dir.empty()) kv["train_dir"] = cfg.train_dir;
    if (!cfg.test_dir.empty()) kv["test_dir"] = cfg.test_dir;

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

SceneConfig scene_config_from(const ExperimentConfig& cfg, std::uint64_t seed) {
    SceneConfig sc;
    sc.image_w = cfg.image_size;
    sc.image_h = cfg.image_size;
    sc.num_classes = cfg.num_classes;
    sc.class_law = cfg.class_law;
    sc.zipf_s = cfg.zipf_s;
    sc.objects_mean = cfg.objects_mean;
    sc.objects_max = cfg.objects_max;
    sc.small_fraction = cfg.small_fraction;
    sc.contrast_lo = cfg.contrast_lo;
    sc.contrast_hi = cfg.contrast_hi;
    sc.seed = seed;
    return sc;
}

ModelConfig model_config_from(const ExperimentConfig& cfg, Variant v,
                              std::uint64_t init_seed) {
    ModelConfig mc;
    mc.in_channels = 1;
    mc.channels = cfg.channels;
    mc.num_classes = cfg.num_classes;
    mc.image_h = cfg.image_size;
    mc.image_w = cfg.image_size;
    mc.gate_init_logit = cfg.gate_init;
    mc.lambda = cfg.lambda;
    mc.roi_size = cfg.roi_size;
    mc.init_seed = init_seed;
    switch (v) {
        case Variant::I:
            mc.has_fdaf = false;
            mc.beta = 0.0;
            break;
        case Variant::II:
            mc.has_fdaf = true;
            mc.gate_trainable = false;  // logits pinned at saturation: no gating
            mc.beta = 0.0;
            break;
        case Variant::III:
            mc.has_fdaf = true;
            mc.gate_trainable = true;
            mc.beta = 0.0;
            break;
        case Variant::IV:
            mc.has_fdaf = true;
            mc.gate_trainable = true;
            mc.beta = cfg.beta;
            break;
    }
    return mc;
}

TrainConfig train_config_from(const ExperimentConfig& cfg, Variant v,
                              std::uint64_t run_seed) {
    TrainConfig tc;
    tc.lr = cfg.lr;
    tc.momentum = cfg.momentum;
    tc.weight_decay = cfg.weight_decay;
    tc.beta = v == Variant::IV ? cfg.beta : 0.0;
    tc.lambda = cfg.lambda;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.roi_size = cfg.roi_size;
    tc.seed = run_seed;
    tc.decode_threshold = cfg.decode_threshold;
    tc.match_iou = cfg.match_iou;
    tc.freq_warmup_steps = cfg.freq_warmup;
    tc.hflip = cfg.hflip;
    return tc;
}

LoadedDataset dataset_from_memory(const SynthDataset& ds) {
    LoadedDataset out;
    out.annotations = ds.annotations;
    for (auto& [image, boxes] : to_samples(ds)) {
        out.samples.push_back({std::move(image), std::move(boxes)});
    }
    for (const auto& img : ds.annotations.images) out.image_ids.push_back(img.id);
    return out;
}

LoadedDataset load_dataset_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    LoadedDataset out;
    out.annotations = load_annotations((root / "annotations.json").string());
    std::map<int, std::vector<BBox>> boxes_by_image;
    for (const auto& a : out.annotations.annotations) {
        boxes_by_image[a.image_id].push_back(
            {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3], a.category_id, 0.0});
    }
    for (const auto& img : out.annotations.images) {
        const Raster raster = read_pgm((root / "images" / img.file_name).string());
        out.samples.push_back({to_feature_map(raster), boxes_by_image[img.id]});
        out.image_ids.push_back(img.id);
    }
    return out;
}

EvalResult evaluate_model(const DetectorModel& m, const LoadedDataset& data,
                          double score_threshold,
                          std::vector<Instance>* predictions_out) {
    constexpr size_t kMaxDetectionsPerImage = 100;
    std::vector<Instance> preds, gts;
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const int image_id = data.image_ids[i];
        const auto& sample = data.samples[i];
        for (const BBox& b : sample.gt) gts.push_back({image_id, b});
        const ForwardResult fwd = forward(m, sample.image);
        // decode emits NMS survivors in score order; keep the usual top 100
        const auto boxes =
            decode(fwd.head, score_threshold, sample.image.width, sample.image.height);
        for (size_t k = 0; k < boxes.size() && k < kMaxDetectionsPerImage; ++k) {
            preds.push_back({image_id, boxes[k]});
        }
    }
    if (predictions_out) *predictions_out = preds;
    return evaluate_detections(preds, gts);
}

AblationCell run_ablation_cell(const ExperimentConfig& cfg, Variant v,
                               std::uint64_t seed) {
    AblationCell cell;
    cell.variant = v;
    cell.seed = seed;
    try {
        const SynthDataset train_ds =
            generate_dataset(scene_config_from(cfg, derive_seed(seed, 101)), cfg.n_train);
        const SynthDataset test_ds =
            generate_dataset(scene_config_from(cfg, derive_seed(seed, 202)), cfg.n_test);
        const LoadedDataset train_data = dataset_from_memory(train_ds);
        const LoadedDataset test_data = dataset_from_memory(test_ds);

        DetectorModel model = make_model(model_config_from(cfg, v, derive_seed(seed, 303)));
        const TrainResult tr =
            train(model, train_data.samples, train_config_from(cfg, v, derive_seed(seed, 404)));
        cell.trace = tr.trace;
        cell.result = evaluate_model(model, test_data, cfg.score_threshold);
        cell.checkpoint = checkpoint_bytes(model);
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
    }
    return cell;
}

int resolve_thread_cap(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FREQPRIV_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

AblationTable run_ablation(const ExperimentConfig& cfg,
                           const std::vector<std::uint64_t>& seeds, int threads) {
    if (seeds.empty()) throw ValidationError("ablation: need at least one seed");
    const Variant variants[] = {Variant::I, Variant::II, Variant::III, Variant::IV};

    AblationTable table;
    table.cells.resize(4 * seeds.size());
    struct Job { Variant v; std::uint64_t seed; size_t slot; };
    std::vector<Job> jobs;
    size_t slot = 0;
    for (const Variant v : variants) {
        for (const std::uint64_t s : seeds) {
            jobs.push_back({v, s, slot++});
        }
    }

    const int n_threads = std::min<int>(resolve_thread_cap(threads),
                                        static_cast<int>(jobs.size()));
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t j = next.fetch_add(1);
            if (j >= jobs.size()) break;
            table.cells[jobs[j].slot] = run_ablation_cell(cfg, jobs[j].v, jobs[j].seed);
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const Variant v : variants) {
        AblationTable::MeanRow row;
        row.variant = v;
        for (const auto& cell : table.cells) {
            if (cell.variant != v || cell.failed) continue;
            if (!cell.result.ap50.has_value()) continue;
            row.ap += cell.result.ap.value_or(0.0);
            row.ap50 += *cell.result.ap50;
            row.ap75 += cell.result.ap75.value_or(0.0);
            row.ap_s += cell.result.ap_s.value_or(0.0);
            ++row.n;
        }
        if (row.n > 0) {
            row.ap /= row.n;
            row.ap50 /= row.n;
            row.ap75 /= row.n;
            row.ap_s /= row.n;
        }
        table.means.push_back(row);
    }
    return table;
}

namespace {

constexpr double kGradTolerance = 1e-4;

std::vector<double> rand_vec(size_t n, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

OpCheck run_check(const std::string& name, const TapeScalarFn& fn,
                  std::vector<GradGroup> groups) {
    const auto report = gradcheck(make_tape_problem(fn), groups, 1e-5);
    return {name, report.max_rel_err, report.max_rel_err <= kGradTolerance};
}

}  // namespace

std::vector<OpCheck> run_op_gradchecks() {
    std::vector<OpCheck> checks;

    checks.push_back(run_check(
        "dft2",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.dft2(t.reshape(v[0], 2, 4, 4)), rand_vec(32, 7002),
                         rand_vec(32, 7003));
        },
        {{"x", rand_vec(2 * 4 * 4, 7004)}}));

    checks.push_back(run_check(
        "idft2",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.idft2(t.dft2(t.reshape(v[0], 2, 4, 4))), rand_vec(32, 7001));
        },
        {{"x", rand_vec(2 * 4 * 4, 7005)}}));

    checks.push_back(run_check(
        "apply_gate",
        [](Tape& t, const std::vector<Var>& v) {
            const Var x = t.reshape(v[0], 1, 4, 4);
            const Var logits = t.reshape(v[1], 1, 4, 4);
            return t.dot(t.idft2(t.apply_gate(t.dft2(x), logits)), rand_vec(16, 7006));
        },
        {{"x", rand_vec(16, 7007)}, {"logits", rand_vec(16, 7008, -2.0, 2.0)}}));

    checks.push_back(run_check(
        "conv1x1",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.conv1x1(t.reshape(v[0], 3, 4, 4), v[1], v[2], 2),
                         rand_vec(32, 7009));
        },
        {{"x", rand_vec(48, 7010)}, {"w", rand_vec(6, 7011)}, {"b", rand_vec(2, 7012)}}));

    checks.push_back(run_check(
        "conv3x3s2",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.conv3x3s2(t.reshape(v[0], 2, 5, 5), v[1], v[2], 2),
                         rand_vec(2 * 3 * 3, 7013));
        },
        {{"x", rand_vec(50, 7014)}, {"w", rand_vec(36, 7015)}, {"b", rand_vec(2, 7016)}}));

    checks.push_back(run_check(
        "bilinear_resize",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.bilinear_resize(t.reshape(v[0], 1, 4, 4), 7, 5),
                         rand_vec(35, 7017));
        },
        {{"x", rand_vec(16, 7018)}}));

    checks.push_back(run_check(
        "window_resample",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.window_resample(t.reshape(v[0], 1, 4, 4),
                                           {0.6, 1.1, 2.5, 2.2}, 3, 3),
                         rand_vec(9, 7019));
        },
        {{"x", rand_vec(16, 7020)}}));

    checks.push_back(run_check(
        "sigmoid",
        [](Tape& t, const std::vector<Var>& v) {
            return t.dot(t.sigmoid(t.reshape(v[0], 1, 1, 12)), rand_vec(12, 7021));
        },
        {{"x", rand_vec(12, 7022, -3.0, 3.0)}}));

    {
        auto x = rand_vec(16, 7023, 0.2, 2.0);
        for (size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
        checks.push_back(run_check(
            "leaky_relu",
            [](Tape& t, const std::vector<Var>& v) {
                return t.dot(t.leaky_relu(t.reshape(v[0], 1, 4, 4), kLeakySlope),
                             rand_vec(16, 7024));
            },
            {{"x", x}}));
    }

    checks.push_back(run_check(
        "concat_add",
        [](Tape& t, const std::vector<Var>& v) {
            const Var a = t.reshape(v[0], 1, 3, 3);
            const Var b = t.reshape(v[1], 1, 3, 3);
            const SVar s1 = t.dot(t.concat_channels(a, b), rand_vec(18, 7025));
            return t.add(s1, t.dot(t.add(a, b), rand_vec(9, 7026)));
        },
        {{"a", rand_vec(9, 7027)}, {"b", rand_vec(9, 7028)}}));

    {
        Rng rng(7029);
        Spectrum target(1, 4, 4);
        for (auto& v : target.values) {
            v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        }
        const auto binw = squared_bin_weights(4, 4, 2.0);
        checks.push_back(run_check(
            "freq_consistency_loss",
            [target, binw](Tape& t, const std::vector<Var>& v) {
                return t.weighted_spectral_sqdist(t.dft2(t.reshape(v[0], 1, 4, 4)),
                                                  target, binw);
            },
            {{"p", rand_vec(16, 7030)}}));
    }

    checks.push_back(run_check(
        "fdaf_block",
        [](Tape& t, const std::vector<Var>& v) {
            const Var input = t.reshape(v[0], 2, 4, 4);
            return t.dot(fdaf_forward(t, input, v[1], v[2], v[3], 2), rand_vec(32, 7031));
        },
        {{"input", rand_vec(32, 7032)},
         {"gate_logits", rand_vec(32, 7033, -2.0, 2.0)},
         {"fusion_w", rand_vec(8, 7034, -0.5, 0.5)},
         {"fusion_b", rand_vec(2, 7035, -0.5, 0.5)}}));

    {
        std::vector<BBox> gt{{2.0, 3.0, 5.0, 4.0, 0, 0.0}, {9.0, 8.0, 6.0, 7.0, 1, 0.0}};
        const Assignment assign = assign_targets(gt, 4, 4, 16, 16, 2);
        checks.push_back(run_check(
            "detection_loss",
            [assign](Tape& t, const std::vector<Var>& v) {
                DetLossTerms terms;
                return detection_loss(t, t.reshape(v[0], 7, 4, 4), assign, terms);
            },
            {{"head", rand_vec(7 * 4 * 4, 7036, -2.0, 2.0)}}));
    }

    {
        ModelConfig mc;
        mc.in_channels = 1;
        mc.channels = 4;
        mc.num_classes = 2;
        mc.image_h = 16;
        mc.image_w = 16;
        mc.roi_size = 4;
        mc.beta = 0.05;
        mc.lambda = 2.0;
        mc.init_seed = 99;
        DetectorModel model = make_model(mc);
        Rng rng(7037);
        // nonzero fusion weights so the gate and frequency paths carry gradient
        for (double& v : model.fdaf.fusion.weight) v = rng.uniform(-0.4, 0.4);
        for (double& v : model.fdaf.fusion.bias) v = rng.uniform(-0.1, 0.1);
        FeatureMap image(1, 16, 16);
        for (double& v : image.values) v = rng.uniform(0.0, 1.0);
        std::vector<BBox> gt{{2.0, 2.0, 6.0, 5.0, 0, 0.0}, {9.0, 8.0, 5.0, 6.0, 1, 0.0}};

        const ForwardResult fwd = forward(model, image);
        LossPlan plan;
        plan.assign = assign_targets(gt, model.grid_h, model.grid_w, 16, 16, 2);
        const BBox pred_a{2.8, 1.4, 6.0, 5.5, 0, 0.9};
        const BBox pred_b{8.3, 8.6, 5.5, 5.0, 1, 0.8};
        plan.freq_pairs = {
            {pred_a, gt[0], dft2(*roi_crop(fwd.neck, gt[0], mc.roi_size))},
            {pred_b, gt[1], dft2(*roi_crop(fwd.neck, gt[1], mc.roi_size))}};

        std::vector<GradGroup> groups;
        for (const ParamRef& p : param_groups(model)) groups.push_back({p.name, *p.values});

        GradCheckProblem problem;
        problem.value = [&model, &image, &plan](const std::vector<std::vector<double>>& g) {
            DetectorModel probe = model;
            set_params(probe, g);
            Tape t;
            return t.value(eval_total_loss(t, probe, image, plan).loss);
        };
        problem.gradient = [&model, &image, &plan](const std::vector<std::vector<double>>& g) {
            DetectorModel probe = model;
            set_params(probe, g);
            Tape t;
            const TapeEval ev = eval_total_loss(t, probe, image, plan);
            t.backward(ev.loss);
            std::vector<std::vector<double>> grads;
            for (const auto& [name, var] : ev.params) grads.push_back(t.grad(var).values);
            return grads;
        };
        const auto report = gradcheck(problem, groups, 1e-5);
        checks.push_back({"total_loss_pipeline", report.max_rel_err,
                          report.max_rel_err <= kGradTolerance});
    }

    return checks;
}

std::string ablation_csv(const AblationTable& table) {
    using nlohmann::json;
    auto num = [](std::optional<double> v) {
        return v.has_value() ? json(*v).dump() : std::string("absent");
    };
    std::string out = "variant,seed,status,ap,ap50,ap75,ap_s\n";
    for (const auto& cell : table.cells) {
        out += std::string(variant_name(cell.variant)) + "," + std::to_string(cell.seed);
        if (cell.failed) {
            out += ",failed,,,,\n";
            continue;
        }
        out += ",ok," + num(cell.result.ap) + "," + num(cell.result.ap50) + "," +
               num(cell.result.ap75) + "," + num(cell.result.ap_s) + "\n";
    }
    for (const auto& row : table.means) {
        out += std::string(variant_name(row.variant)) + ",mean,ok," +
               json(row.ap).dump() + "," + json(row.ap50).dump() + "," +
               json(row.ap75).dump() + "," + json(row.ap_s).dump() + "\n";
    }
    return out;
}

}  // namespace freqpriv
