// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria may be selected by number on the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "freqpriv/experiment.hpp"
#include "test_oracles.hpp"

using namespace freqpriv;

namespace {

struct Criterion {
    int number;
    std::string name;
    std::function<bool(std::string&)> run;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

FeatureMap random_tensor(Rng& rng, int max_c, int max_hw) {
    const int c = rng.uniform_int(1, max_c);
    const int h = rng.uniform_int(1, max_hw);
    const int w = rng.uniform_int(1, max_hw);
    FeatureMap x(c, h, w);
    for (double& v : x.values) v = rng.uniform(-3.0, 3.0);
    return x;
}

// --- criterion 1: spectral kernel properties ------------------------------

bool crit_spectral(std::string& detail) {
    const double t0 = now_seconds();
    Rng rng(1001);
    double worst_rt = 0.0, worst_parseval = 0.0, worst_herm = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const FeatureMap x = random_tensor(rng, 4, 16);
        const Spectrum f = dft2(x);
        const FeatureMap back = idft2(f);
        for (size_t i = 0; i < x.size(); ++i) {
            worst_rt = std::max(worst_rt, std::abs(back.values[i] - x.values[i]));
        }
        const size_t plane = static_cast<size_t>(x.height) * x.width;
        for (int c = 0; c < x.channels; ++c) {
            double space = 0.0, freq = 0.0;
            for (size_t i = 0; i < plane; ++i) {
                space += x.values[c * plane + i] * x.values[c * plane + i];
                freq += std::norm(f.values[c * plane + i]);
            }
            freq /= static_cast<double>(plane);
            worst_parseval = std::max(
                worst_parseval, std::abs(space - freq) / std::max(1.0, std::abs(space)));
        }
        for (int c = 0; c < x.channels; ++c) {
            for (int u = 0; u < x.height; ++u) {
                for (int v = 0; v < x.width; ++v) {
                    const auto a = f.at(c, u, v);
                    const auto b = std::conj(f.at(c, (x.height - u) % x.height,
                                                  (x.width - v) % x.width));
                    worst_herm = std::max(worst_herm, std::abs(a - b));
                }
            }
        }
    }
    const double elapsed = now_seconds() - t0;
    detail = "round_trip=" + fmt(worst_rt) + " parseval=" + fmt(worst_parseval) +
             " hermitian=" + fmt(worst_herm) + " time=" + fmt(elapsed) + "s";
    return worst_rt <= 1e-10 && worst_parseval <= 1e-9 && worst_herm <= 1e-10 &&
           elapsed < 10.0;
}

// --- criterion 2: gradient suite -------------------------------------------

bool crit_gradients(std::string& detail) {
    const double t0 = now_seconds();
    const auto checks = run_op_gradchecks();
    double worst = 0.0;
    std::string worst_name;
    bool all_pass = true;
    for (const auto& c : checks) {
        if (c.max_rel_err > worst) {
            worst = c.max_rel_err;
            worst_name = c.name;
        }
        all_pass = all_pass && c.pass;
    }
    const double elapsed = now_seconds() - t0;
    detail = std::to_string(checks.size()) + " ops, worst=" + fmt(worst) + " (" +
             worst_name + ") time=" + fmt(elapsed) + "s";
    return all_pass && elapsed < 120.0;
}

// --- criterion 3: mechanism identities --------------------------------------

bool crit_mechanism(std::string& detail) {
    Rng rng(1003);

    // zero-fusion FDAF is bit-exact identity
    FeatureMap x(3, 8, 8);
    for (double& v : x.values) v = rng.uniform(-2.0, 2.0);
    const FdafBlock block(3, 8, 8, 2.0);
    const FeatureMap out = fdaf_forward(x, block);
    bool identity = true;
    for (size_t i = 0; i < x.size(); ++i) identity = identity && out.values[i] == x.values[i];

    // freq loss of identical crops is exactly zero
    const bool zero_loss = freq_consistency_loss({x}, {x}, 2.0).value == 0.0;

    // worked 1x2 example: 16 at lambda 1
    FeatureMap p(1, 1, 2);
    p.values = {1.0, -1.0};
    FeatureMap t(1, 1, 2, 0.0);
    const double worked = freq_consistency_loss({p}, {t}, 1.0).value;
    const bool worked_ok = std::abs(worked - 16.0) <= 1e-9;

    // composition with beta = 0.05 is bit-exact
    ModelConfig mc;
    mc.channels = 4;
    mc.num_classes = 2;
    mc.image_h = 16;
    mc.image_w = 16;
    mc.roi_size = 4;
    mc.beta = 0.05;
    mc.init_seed = 17;
    DetectorModel model = make_model(mc);
    for (double& v : model.fdaf.fusion.weight) v = rng.uniform(-0.3, 0.3);
    FeatureMap image(1, 16, 16);
    for (double& v : image.values) v = rng.uniform(0.0, 1.0);
    const std::vector<BBox> gt{{2.0, 2.0, 7.0, 6.0, 0, 0.0}};
    const ForwardResult fwd = forward(model, image);
    LossPlan plan;
    plan.assign = assign_targets(gt, model.grid_h, model.grid_w, 16, 16, 2);
    const BBox pred{3.0, 1.0, 7.0, 6.5, 0, 0.9};
    plan.freq_pairs = {{pred, gt[0], dft2(*roi_crop(fwd.neck, gt[0], mc.roi_size))}};
    Tape tape;
    const TapeEval ev = eval_total_loss(tape, model, image, plan);
    const bool composed = ev.breakdown.total ==
                          ev.breakdown.det + 0.05 * ev.breakdown.freq &&
                          ev.breakdown.freq > 0.0;

    detail = std::string("identity=") + (identity ? "exact" : "BROKEN") +
             " loss(P,P)=" + (zero_loss ? "0" : "nonzero") +
             " worked=" + fmt(worked) + " eq6=" + (composed ? "bit-exact" : "BROKEN");
    return identity && zero_loss && worked_ok && composed;
}

// --- criterion 4: statistics oracle ----------------------------------------

bool crit_stats(std::string& detail) {
    const std::string dir = std::string(FREQPRIV_SOURCE_DIR) + "/fixtures/stats_fixture";
    const AnnotationSet set = load_annotations(dir + "/annotations.json");
    std::map<int, Raster> rasters;
    for (const auto& img : set.images) {
        rasters[img.id] = read_pgm(dir + "/images/" + img.file_name);
    }
    const StatsReport report = compute_stats(set, rasters, {2});

    bool ok = true;
    auto expect = [&ok](bool cond) { ok = ok && cond; };

    expect(report.class_counts.at(1) == 4 && report.class_counts.at(2) == 2 &&
           report.class_counts.at(3) == 1 && report.class_counts.at(4) == 1);
    expect(report.cv == std::sqrt(1.5) / 2.0);
    expect(report.top20 == 0.5);

    std::map<int, double> sizes, contrast;
    for (const auto& s : report.sizes) sizes[s.annotation_id] = s.ratio;
    for (const auto& c : report.contrast) contrast[c.annotation_id] = c.contrast;
    expect(sizes.at(1) == 1.0 && sizes.at(2) == 0.25 && sizes.at(3) == 0.5 &&
           sizes.at(4) == 0.25 && sizes.at(5) == 0.5 && sizes.at(6) == 0.125 &&
           sizes.at(7) == 0.25 && sizes.at(8) == 0.25);
    expect(contrast.at(1) == 1.0 && contrast.at(2) == 1.0 && contrast.at(3) == 0.0 &&
           contrast.at(4) == 1.0 && contrast.at(5) == 0.0 && contrast.at(6) == 1.0 &&
           contrast.at(7) == 1.0 / 2.5 && contrast.at(8) == 0.0);
    expect(report.disparity.size() == 2 && report.disparity[0].value == std::log(4.0) &&
           report.disparity[1].value == std::log(4.0));
    expect(report.face_density.image_count[1] == 1 &&
           report.face_density.instance_count[1] == 2);

    const double cv_spec = class_cv({80, 5, 5, 5, 5});
    const double top_spec = top_fraction_concentration({80, 5, 5, 5, 5}, 0.2);
    expect(std::abs(cv_spec - 1.5) <= 1e-12);
    expect(std::abs(top_spec - 0.80) <= 1e-12);

    detail = "cv=" + fmt(report.cv) + " top20=" + fmt(report.top20) +
             " cv([80,5*4])=" + fmt(cv_spec) + " top20([80,5*4])=" + fmt(top_spec);
    return ok;
}

// --- criterion 5: overfit sanity --------------------------------------------

TrainResult overfit_run(DetectorModel& m) {
    SceneConfig sc;
    sc.image_w = 64;
    sc.image_h = 64;
    sc.num_classes = 4;
    sc.objects_mean = 3.0;
    sc.objects_max = 4;
    sc.contrast_lo = 2.0;
    sc.contrast_hi = 4.0;
    sc.seed = 21;
    const SynthDataset ds = generate_dataset(sc, 1);
    auto pairs = to_samples(ds);
    std::vector<TrainSample> data{{pairs[0].first, pairs[0].second}};

    TrainConfig tc;
    tc.lr = 0.02;
    tc.epochs = 200;
    tc.batch_size = 1;
    tc.beta = 0.0;
    tc.seed = 10;
    return train(m, data, tc);
}

bool crit_overfit(std::string& detail) {
    const double t0 = now_seconds();
    ModelConfig mc;
    mc.channels = 8;
    mc.num_classes = 4;
    mc.image_h = 64;
    mc.image_w = 64;
    mc.init_seed = 3;

    DetectorModel m1 = make_model(mc);
    const TrainResult r1 = overfit_run(m1);
    DetectorModel m2 = make_model(mc);
    const TrainResult r2 = overfit_run(m2);

    bool deterministic = r1.trace.size() == r2.trace.size();
    for (size_t i = 0; deterministic && i < r1.trace.size(); ++i) {
        deterministic = r1.trace[i].det == r2.trace[i].det;
    }
    const double initial = r1.trace.front().det;
    const double final = r1.trace.back().det;
    const double elapsed = now_seconds() - t0;
    detail = "L_det " + fmt(initial) + " -> " + fmt(final) + " (" +
             fmt(100.0 * final / initial) + "% of initial), deterministic=" +
             (deterministic ? "yes" : "NO") + ", time=" + fmt(elapsed) + "s";
    return final < 0.1 * initial && deterministic && elapsed < 120.0;
}

// --- criterion 6: ablation trend ---------------------------------------------

ExperimentConfig ablation_config() {
    ExperimentConfig cfg;
    cfg.image_size = 64;
    cfg.num_classes = 8;
    cfg.channels = 8;
    cfg.small_fraction = 0.6;
    cfg.n_train = 2000;
    cfg.n_test = 500;
    cfg.objects_mean = 3.0;
    cfg.objects_max = 5;
    cfg.contrast_lo = 0.05;
    cfg.contrast_hi = 0.35;
    cfg.epochs = 6;
    cfg.batch_size = 8;
    cfg.lr = 0.02;
    cfg.freq_warmup = 250;
    cfg.seeds = {1, 2, 3, 4, 5};
    return cfg;
}

bool crit_ablation(std::string& detail) {
    const double t0 = now_seconds();
    const ExperimentConfig cfg = ablation_config();
    const AblationTable table = run_ablation(cfg, cfg.seeds);

    double mean[4] = {0, 0, 0, 0};
    bool complete = true;
    for (const auto& row : table.means) {
        mean[static_cast<int>(row.variant)] = row.ap50;
        complete = complete && row.n == static_cast<int>(cfg.seeds.size());
    }

    bool freq_ok = true;
    for (const auto& cell : table.cells) {
        if (cell.failed) continue;
        double freq_total = 0.0;
        for (const auto& t : cell.trace) freq_total += t.freq_term;
        if (cell.variant == Variant::IV) {
            freq_ok = freq_ok && freq_total > 0.0;
        } else {
            freq_ok = freq_ok && freq_total == 0.0;
        }
    }

    const double elapsed = now_seconds() - t0;
    const double delta = mean[3] - mean[0];
    const bool monotonic =
        mean[0] <= mean[1] && mean[1] <= mean[2] && mean[2] <= mean[3];
    detail = "mean AP50: I=" + fmt(100 * mean[0]) + " II=" + fmt(100 * mean[1]) +
             " III=" + fmt(100 * mean[2]) + " IV=" + fmt(100 * mean[3]) +
             " | IV-I=" + fmt(100 * delta) + "pts, monotonic(I<=II<=III<=IV)=" +
             (monotonic ? "yes" : "no (reported, not gated)") +
             ", freq-term=" + (freq_ok ? "ok" : "BROKEN") + ", time=" +
             fmt(elapsed / 60.0) + "min";
    return complete && freq_ok && mean[3] >= mean[0] && delta >= 0.01 &&
           elapsed <= 45.0 * 60.0;
}

// --- criterion 7: evaluator equivalence --------------------------------------

bool crit_evaluator(std::string& detail) {
    Rng rng(1007);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Instance> gts, preds;
        const int n_gt = rng.uniform_int(1, 6);
        const int n_pred = rng.uniform_int(0, 8);
        for (int i = 0; i < n_gt; ++i) {
            gts.push_back({rng.uniform_int(1, 3),
                           {rng.uniform(0.0, 40.0), rng.uniform(0.0, 40.0),
                            rng.uniform(2.0, 20.0), rng.uniform(2.0, 20.0),
                            rng.uniform_int(0, 1), 0.0}});
        }
        for (int i = 0; i < n_pred; ++i) {
            preds.push_back({rng.uniform_int(1, 3),
                             {rng.uniform(0.0, 40.0), rng.uniform(0.0, 40.0),
                              rng.uniform(2.0, 20.0), rng.uniform(2.0, 20.0),
                              rng.uniform_int(0, 1), rng.uniform()}});
        }
        for (double thr : {0.5, 0.75}) {
            const auto got = average_precision(preds, gts, thr);
            const auto expected = freqpriv::test::ap_oracle(preds, gts, thr);
            if (got.has_value() != expected.has_value()) return false;
            if (got.has_value()) worst = std::max(worst, std::abs(*got - *expected));
        }
    }

    // perfect predictions
    std::vector<Instance> gts{{1, {2, 3, 8, 6, 0, 0}}, {2, {1, 1, 5, 5, 1, 0}}};
    std::vector<Instance> perfect = gts;
    for (auto& p : perfect) p.box.score = 0.9;
    const EvalResult r = evaluate_detections(perfect, gts);
    const bool perfect_ok = r.ap.value_or(0.0) == 1.0 && r.f1.value_or(0.0) == 1.0;

    detail = "max |AP - oracle| = " + fmt(worst) +
             ", perfect AP/F1 = " + fmt(r.ap.value_or(-1)) + "/" + fmt(r.f1.value_or(-1));
    return worst <= 1e-12 && perfect_ok;
}

// --- criterion 8: reproducibility ---------------------------------------------

bool crit_reproducibility(std::string& detail) {
    // dataset bytes
    SceneConfig sc;
    sc.image_w = 32;
    sc.image_h = 32;
    sc.num_classes = 4;
    sc.objects_mean = 2.0;
    sc.objects_max = 3;
    sc.seed = 77;
    const SynthDataset d1 = generate_dataset(sc, 16);
    const SynthDataset d2 = generate_dataset(sc, 16);
    bool data_ok = d1.manifest_json == d2.manifest_json &&
                   annotations_to_json(d1.annotations) == annotations_to_json(d2.annotations);
    for (size_t i = 0; data_ok && i < d1.images.size(); ++i) {
        data_ok = encode_pgm(d1.images[i]) == encode_pgm(d2.images[i]);
    }

    // checkpoint and metrics bytes through a small train/eval cycle
    ExperimentConfig cfg;
    cfg.image_size = 32;
    cfg.num_classes = 4;
    cfg.channels = 4;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.n_train = 12;
    cfg.n_test = 6;
    cfg.objects_mean = 2.0;
    cfg.objects_max = 3;

    const AblationCell c1 = run_ablation_cell(cfg, Variant::IV, 9);
    const AblationCell c2 = run_ablation_cell(cfg, Variant::IV, 9);
    const bool cell_ok = !c1.failed && !c2.failed && c1.checkpoint == c2.checkpoint;

    AblationTable t1, t2;
    t1.cells = {c1};
    t2.cells = {c2};
    const bool metrics_ok = ablation_csv(t1) == ablation_csv(t2);

    detail = std::string("dataset=") + (data_ok ? "byte-identical" : "DIFFERS") +
             " checkpoint=" + (cell_ok ? "byte-identical" : "DIFFERS") +
             " metrics=" + (metrics_ok ? "byte-identical" : "DIFFERS");
    return data_ok && cell_ok && metrics_ok;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria{
        {1, "spectral kernel (round trip, Parseval, Hermitian)", crit_spectral},
        {2, "gradient suite (all ops + full pipeline <= 1e-4)", crit_gradients},
        {3, "mechanism identities (FDAF identity, L_freq, composition)", crit_mechanism},
        {4, "statistics oracle (fixture + CV/Top-20%)", crit_stats},
        {5, "overfit sanity (200 steps, single image)", crit_overfit},
        {6, "ablation trend (IV - I >= +1.0 AP50 over 5 seeds)", crit_ablation},
        {7, "evaluator equivalence (brute-force oracle)", crit_evaluator},
        {8, "reproducibility (byte-identical reruns)", crit_reproducibility},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), c.number) == selected.end()) {
            continue;
        }
        std::string detail;
        bool pass = false;
        try {
            pass = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", c.number,
                    c.name.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
