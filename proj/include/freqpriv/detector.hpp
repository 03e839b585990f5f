#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "freqpriv/bbox.hpp"
#include "freqpriv/freq.hpp"
#include "freqpriv/tape.hpp"

namespace freqpriv {

constexpr int kStride = 4;          // backbone downsampling factor
constexpr double kNmsIou = 0.6;
constexpr double kLeakySlope = 0.1;

struct ModelConfig {
    int in_channels = 1;
    int channels = 8;        // feature width C
    int num_classes = 8;     // K
    int image_h = 64;
    int image_w = 64;
    bool has_fdaf = true;
    bool gate_trainable = true;  // false: logits pinned (gating disabled)
    double gate_init_logit = 2.0;
    double beta = 0.05;      // Eq.-6 style weight on the frequency loss
    double lambda = 2.0;     // radial weight slope
    int roi_size = 16;       // S
    std::uint64_t init_seed = 0;
};

// Single-scale anchor-free detector: two stride-2 3x3 convs, an optional
// FDAF neck block, and a 1x1 head emitting per cell
// [objectness, K class logits, tx, ty, tw, th].
struct DetectorModel {
    ModelConfig cfg;
    int grid_h = 0;
    int grid_w = 0;
    Conv3x3 stem1;
    Conv3x3 stem2;
    FdafBlock fdaf;  // unused when !cfg.has_fdaf
    Conv1x1 head;

    int head_channels() const { return 1 + cfg.num_classes + 4; }
};

DetectorModel make_model(const ModelConfig& cfg);

// Named views over the trainable parameter vectors, in a fixed order.
struct ParamRef {
    std::string name;
    std::vector<double>* values;
    bool trainable;
};
std::vector<ParamRef> param_groups(DetectorModel& m);

// Overwrite all parameters in param_groups() order; sizes must match.
void set_params(DetectorModel& m, const std::vector<std::vector<double>>& values);

struct ForwardResult {
    FeatureMap head;  // (1+K+4) x H/4 x W/4
    FeatureMap neck;  // C x H/4 x W/4, FDAF output (or backbone output)
};
ForwardResult forward(const DetectorModel& m, const FeatureMap& image);

// Decode the raw head map into boxes: score = sigmoid(obj) * max softmax
// class prob; centers are cell center + tanh-bounded offsets, sizes are
// exp-scaled in stride units; boxes clamp to the image. Greedy same-class
// NMS at IoU 0.6.
std::vector<BBox> decode(const FeatureMap& head, double score_threshold,
                         int image_w, int image_h);

// Center-cell target assignment; collisions go to the larger-area box.
struct Assignment {
    int grid_h = 0;
    int grid_w = 0;
    int num_classes = 0;
    struct Positive {
        int cell = 0;  // gy * grid_w + gx
        int class_id = 0;
        double t[4] = {0, 0, 0, 0};  // tx, ty, tw, th regression targets
    };
    std::vector<Positive> positives;
    std::vector<std::string> rejected;  // diagnostics for dropped GTs
};
Assignment assign_targets(const std::vector<BBox>& gt, int grid_h, int grid_w,
                          int image_w, int image_h, int num_classes);

struct DetLossTerms {
    double objectness = 0.0;
    double classification = 0.0;
    double box = 0.0;
    double total() const { return objectness + classification + box; }
};

// BCE on objectness over all cells + softmax CE on class at positives +
// smooth-L1 on box regressands at positives; each term mean-reduced.
DetLossTerms detection_loss(const FeatureMap& head, const Assignment& assign);

// Tape version; returns the scalar node and fills `terms`.
SVar detection_loss(Tape& t, Var head, const Assignment& assign, DetLossTerms& terms);

// Bilinear crop of the feature window under `box` (image pixels, stride 4)
// resized to S x S. Returns nullopt when the window has no positive extent.
std::optional<FeatureMap> roi_crop(const FeatureMap& feature, const BBox& box, int s);

// Non-differentiable planning phase of the total loss: decode, match
// predictions to GT by IoU, fix the crop windows and the gradient-stopped
// target spectra. Gradients are taken with the plan frozen.
struct LossPlan {
    Assignment assign;
    struct FreqPair {
        BBox pred_box;
        BBox gt_box;
        Spectrum target;  // dft2 of the GT-box crop, held constant
    };
    std::vector<FreqPair> freq_pairs;
    int n_skipped_crops = 0;
};
LossPlan plan_loss(const DetectorModel& m, const ForwardResult& fwd,
                   const std::vector<BBox>& gt, int image_w, int image_h,
                   double decode_threshold, double match_iou);

struct LossBreakdown {
    double total = 0.0;
    double det = 0.0;
    double freq = 0.0;  // L_freq (unweighted)
    DetLossTerms det_terms;
    int matched_pairs = 0;
    bool no_freq_targets = false;
};

// Differentiable evaluation given a frozen plan. Parameter leaves are created
// on the tape in param_groups() order and returned for gradient extraction.
struct TapeEval {
    SVar loss;
    LossBreakdown breakdown;
    std::vector<std::pair<std::string, Var>> params;
    Var head;
    Var neck;
};
TapeEval eval_total_loss(Tape& t, const DetectorModel& m, const FeatureMap& image,
                         const LossPlan& plan);

// Plan + evaluate (values only).
LossBreakdown total_loss(const DetectorModel& m, const FeatureMap& image,
                         const std::vector<BBox>& gt, double decode_threshold = 0.05,
                         double match_iou = 0.25);

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.937;
    double weight_decay = 5e-4;
    double beta = 0.05;
    double lambda = 2.0;
    int epochs = 1;
    int batch_size = 8;
    int roi_size = 16;
    std::uint64_t seed = 0;
    double decode_threshold = 0.05;  // candidate threshold for Eq.-5 matching
    double match_iou = 0.25;
    int freq_warmup_steps = 0;       // frequency loss disabled before this step
    bool hflip = false;
    // global gradient-norm clip; the spectral loss is an unnormalized sum over
    // bins and can spike by orders of magnitude when matching first succeeds.
    double grad_clip_norm = 10.0;    // 0 disables
};

struct TrainSample {
    FeatureMap image;
    std::vector<BBox> gt;
};

struct StepTrace {
    int step = 0;
    double total = 0.0;
    double det = 0.0;
    double freq_term = 0.0;  // beta * L_freq contribution
    int matched_pairs = 0;
};

struct TrainResult {
    std::vector<StepTrace> trace;
    int steps = 0;
};

// Thrown when training hits a non-finite loss.
struct TrainDivergence : NumericError {
    TrainDivergence(int step, const LossBreakdown& b)
        : NumericError("non-finite loss at step " + std::to_string(step) +
                       " (det=" + std::to_string(b.det) +
                       ", freq=" + std::to_string(b.freq) + ")"),
          step_index(step), breakdown(b) {}
    int step_index;
    LossBreakdown breakdown;
};

// Deterministic SGD with momentum 0.937 and decoupled weight decay applied
// as p <- (1 - wd) * p - lr * v.
TrainResult train(DetectorModel& m, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg);

}  // namespace freqpriv
