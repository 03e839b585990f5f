#pragma once

#include <map>
#include <optional>
#include <vector>

#include "freqpriv/bbox.hpp"

namespace freqpriv {

// One detection or ground-truth instance attached to an image.
struct Instance {
    int image_id = 0;
    BBox box;
};

// Intersection over union; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);

// GT-area buckets for AP_S / AP_M / AP_L, using the 32^2 / 96^2 pixel-area
// convention.
enum class SizeBucket { Small, Medium, Large };

// Class-mean average precision at one IoU threshold with 101-point
// interpolated precision-recall integration. Returns nullopt when no
// ground truth is in scope (e.g. empty bucket).
std::optional<double> average_precision(const std::vector<Instance>& preds,
                                        const std::vector<Instance>& gts,
                                        double iou_threshold,
                                        std::optional<SizeBucket> bucket = {});

// Best F1 over a sweep of score thresholds at IoU 0.5. Absent when there are
// neither ground truths nor predictions.
std::optional<double> f1_at_best_threshold(const std::vector<Instance>& preds,
                                           const std::vector<Instance>& gts);

struct EvalResult {
    std::optional<double> ap;    // mean over IoU 0.50:0.05:0.95
    std::optional<double> ap50;
    std::optional<double> ap75;
    std::optional<double> ap_s;
    std::optional<double> ap_m;
    std::optional<double> ap_l;
    std::optional<double> f1;
    std::map<int, double> per_class_ap50;
};

EvalResult evaluate_detections(const std::vector<Instance>& preds,
                               const std::vector<Instance>& gts);

}  // namespace freqpriv
