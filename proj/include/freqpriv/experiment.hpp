#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "freqpriv/checkpoint.hpp"
#include "freqpriv/detector.hpp"
#include "freqpriv/eval.hpp"
#include "freqpriv/synth.hpp"

namespace freqpriv {

// Ablation ladder: base detector, +frequency branch, +learnable gating,
// +frequency-consistency loss.
enum class Variant { I, II, III, IV };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);

// Flat key=value experiment configuration; unknown keys are rejected.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    int image_size = 64;
    int channels = 8;
    int num_classes = 8;
    double beta = 0.05;
    double lambda = 2.0;
    int roi_size = 16;
    double gate_init = 2.0;
    double lr = 0.01;
    double momentum = 0.937;
    double weight_decay = 5e-4;
    int epochs = 4;
    int batch_size = 8;
    double decode_threshold = 0.05;
    double match_iou = 0.25;
    int freq_warmup = 0;
    bool hflip = false;
    double score_threshold = 0.05;  // decode threshold at evaluation time
    Variant variant = Variant::IV;

    // synthetic data
    int n_images = 100;
    int n_train = 2000;
    int n_test = 500;
    double objects_mean = 3.0;
    int objects_max = 8;
    double small_fraction = 0.6;
    double contrast_lo = 0.2;
    double contrast_hi = 0.8;
    ClassLaw class_law = ClassLaw::Uniform;
    double zipf_s = 1.0;

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};  // ablation seeds
    std::string train_dir;
    std::string test_dir;
};

ExperimentConfig parse_experiment_config_text(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
// Full key=value dump of the resolved configuration, sorted by key.
std::string resolved_config_text(const ExperimentConfig& cfg);

SceneConfig scene_config_from(const ExperimentConfig& cfg, std::uint64_t seed);
ModelConfig model_config_from(const ExperimentConfig& cfg, Variant v,
                              std::uint64_t init_seed);
TrainConfig train_config_from(const ExperimentConfig& cfg, Variant v,
                              std::uint64_t run_seed);

// Dataset directory layout produced by the synth command:
//   images/*.pgm, annotations.json, manifest.json
struct LoadedDataset {
    std::vector<TrainSample> samples;
    std::vector<int> image_ids;
    AnnotationSet annotations;
};
LoadedDataset load_dataset_dir(const std::string& dir);
LoadedDataset dataset_from_memory(const SynthDataset& ds);

// Forward + decode over a dataset; returns detection metrics against the GT.
EvalResult evaluate_model(const DetectorModel& m, const LoadedDataset& data,
                          double score_threshold,
                          std::vector<Instance>* predictions_out = nullptr);

struct AblationCell {
    Variant variant = Variant::I;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    EvalResult result;
    std::vector<StepTrace> trace;
    std::string checkpoint;  // serialized model bytes
};

struct AblationTable {
    std::vector<AblationCell> cells;  // variant-major, seed-minor
    // per-variant means over non-failed seeds (absent metrics skipped)
    struct MeanRow {
        Variant variant;
        int n = 0;
        double ap = 0, ap50 = 0, ap75 = 0, ap_s = 0;
    };
    std::vector<MeanRow> means;
};

AblationCell run_ablation_cell(const ExperimentConfig& cfg, Variant v,
                               std::uint64_t seed);
// threads <= 0 picks FREQPRIV_THREADS or the hardware concurrency.
AblationTable run_ablation(const ExperimentConfig& cfg,
                           const std::vector<std::uint64_t>& seeds, int threads = 0);
std::string ablation_csv(const AblationTable& table);

int resolve_thread_cap(int requested);

// Finite-difference verification of every differentiable op plus the full
// total-loss pipeline on a tiny model (C=4, 16x16 input, eps 1e-5).
struct OpCheck {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};
std::vector<OpCheck> run_op_gradchecks();

}  // namespace freqpriv
