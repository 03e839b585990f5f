#include "freqpriv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace freqpriv {

double iou(const BBox& a, const BBox& b) {
    const double ix1 = std::max(a.x, b.x);
    const double iy1 = std::max(a.y, b.y);
    const double ix2 = std::min(a.x + a.w, b.x + b.w);
    const double iy2 = std::min(a.y + a.h, b.y + b.h);
    const double iw = std::max(0.0, ix2 - ix1);
    const double ih = std::max(0.0, iy2 - iy1);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

bool in_bucket(double area, SizeBucket b) {
    constexpr double kSmallMax = 32.0 * 32.0;
    constexpr double kMediumMax = 96.0 * 96.0;
    switch (b) {
        case SizeBucket::Small: return area < kSmallMax;
        case SizeBucket::Medium: return area >= kSmallMax && area <= kMediumMax;
        case SizeBucket::Large: return area > kMediumMax;
    }
    return false;
}

struct IndexedPred {
    const Instance* inst;
    size_t order;  // original index, for deterministic tie-breaks
};

std::vector<IndexedPred> sorted_class_preds(const std::vector<Instance>& preds,
                                            int class_id) {
    std::vector<IndexedPred> out;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].box.class_id == class_id) out.push_back({&preds[i], i});
    }
    std::sort(out.begin(), out.end(), [](const IndexedPred& a, const IndexedPred& b) {
        if (a.inst->box.score != b.inst->box.score)
            return a.inst->box.score > b.inst->box.score;
        if (a.inst->image_id != b.inst->image_id)
            return a.inst->image_id < b.inst->image_id;
        return a.order < b.order;
    });
    return out;
}

double interpolate_101(const std::vector<double>& precision,
                       const std::vector<double>& recall) {
    // max precision at recall >= r over the 101-point recall grid
    double ap = 0.0;
    for (int g = 0; g <= 100; ++g) {
        const double r = g / 100.0;
        double best = 0.0;
        for (size_t k = 0; k < recall.size(); ++k) {
            if (recall[k] >= r - 1e-12 && precision[k] > best) best = precision[k];
        }
        ap += best;
    }
    return ap / 101.0;
}

// Per-class AP at one IoU threshold, or nullopt when the class has no
// ground truth in scope.
std::optional<double> class_ap(const std::vector<Instance>& preds,
                               const std::vector<Instance>& gts, int class_id,
                               double thr, std::optional<SizeBucket> bucket) {
    struct GtEntry {
        const Instance* inst;
        bool ignored;
        bool matched = false;
    };
    std::vector<GtEntry> class_gts;
    int n_active = 0;
    for (const auto& g : gts) {
        if (g.box.class_id != class_id) continue;
        const bool ign = bucket.has_value() && !in_bucket(g.box.area(), *bucket);
        class_gts.push_back({&g, ign});
        if (!ign) ++n_active;
    }
    if (n_active == 0) return std::nullopt;

    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const auto& p : sorted_class_preds(preds, class_id)) {
        int best_live = -1, best_ign = -1;
        double best_live_iou = thr, best_ign_iou = thr;
        for (size_t k = 0; k < class_gts.size(); ++k) {
            auto& g = class_gts[k];
            if (g.matched || g.inst->image_id != p.inst->image_id) continue;
            const double v = iou(p.inst->box, g.inst->box);
            if (g.ignored) {
                if (v >= best_ign_iou) { best_ign_iou = v; best_ign = static_cast<int>(k); }
            } else {
                if (v >= best_live_iou) { best_live_iou = v; best_live = static_cast<int>(k); }
            }
        }
        if (best_live >= 0) {
            class_gts[best_live].matched = true;
            ++tp;
        } else if (best_ign >= 0) {
            class_gts[best_ign].matched = true;  // matched to out-of-scope GT: ignored
            continue;
        } else {
            if (bucket.has_value() && !in_bucket(p.inst->box.area(), *bucket)) continue;
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / n_active);
    }
    return interpolate_101(precision, recall);
}

std::set<int> gt_classes(const std::vector<Instance>& gts) {
    std::set<int> out;
    for (const auto& g : gts) out.insert(g.box.class_id);
    return out;
}

}  // namespace

std::optional<double> average_precision(const std::vector<Instance>& preds,
                                        const std::vector<Instance>& gts,
                                        double iou_threshold,
                                        std::optional<SizeBucket> bucket) {
    double sum = 0.0;
    int n = 0;
    for (int c : gt_classes(gts)) {
        const auto ap = class_ap(preds, gts, c, iou_threshold, bucket);
        if (ap.has_value()) {
            sum += *ap;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::optional<double> f1_at_best_threshold(const std::vector<Instance>& preds,
                                           const std::vector<Instance>& gts) {
    if (preds.empty() && gts.empty()) return std::nullopt;
    if (preds.empty()) return 0.0;

    // Greedy score-descending matching is prefix-stable: the matches made for
    // the predictions above any threshold do not depend on the ones below it.
    // One matching pass plus prefix sums therefore covers the whole sweep.
    std::vector<const Instance*> order;
    order.reserve(preds.size());
    for (const auto& p : preds) order.push_back(&p);
    std::stable_sort(order.begin(), order.end(), [](const Instance* a, const Instance* b) {
        return a->box.score > b->box.score;
    });

    std::vector<bool> gt_used(gts.size(), false);
    std::vector<char> is_tp(order.size(), 0);
    for (size_t i = 0; i < order.size(); ++i) {
        const Instance* p = order[i];
        int best = -1;
        double best_iou = 0.5;
        for (size_t k = 0; k < gts.size(); ++k) {
            if (gt_used[k] || gts[k].image_id != p->image_id ||
                gts[k].box.class_id != p->box.class_id)
                continue;
            const double v = iou(p->box, gts[k].box);
            if (v >= best_iou) { best_iou = v; best = static_cast<int>(k); }
        }
        if (best >= 0) {
            gt_used[best] = true;
            is_tp[i] = 1;
        }
    }

    double best_f1 = 0.0;
    int tp = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        tp += is_tp[i];
        // threshold = this score: keep predictions 0..i plus score ties below
        if (i + 1 < order.size() && order[i + 1]->box.score == order[i]->box.score) {
            continue;
        }
        const double prec = static_cast<double>(tp) / static_cast<double>(i + 1);
        const double rec = gts.empty() ? 0.0 : static_cast<double>(tp) / gts.size();
        const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        best_f1 = std::max(best_f1, f1);
    }
    return best_f1;
}

EvalResult evaluate_detections(const std::vector<Instance>& preds,
                               const std::vector<Instance>& gts) {
    EvalResult r;
    auto mean_over_thresholds = [&](std::optional<SizeBucket> bucket) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (int t = 0; t < 10; ++t) {
            const double thr = 0.5 + 0.05 * t;
            const auto ap = average_precision(preds, gts, thr, bucket);
            if (ap.has_value()) {
                sum += *ap;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / n;
    };
    r.ap = mean_over_thresholds({});
    r.ap50 = average_precision(preds, gts, 0.50);
    r.ap75 = average_precision(preds, gts, 0.75);
    r.ap_s = mean_over_thresholds(SizeBucket::Small);
    r.ap_m = mean_over_thresholds(SizeBucket::Medium);
    r.ap_l = mean_over_thresholds(SizeBucket::Large);
    r.f1 = f1_at_best_threshold(preds, gts);
    for (int c : gt_classes(gts)) {
        const auto ap = class_ap(preds, gts, c, 0.5, {});
        if (ap.has_value()) r.per_class_ap50[c] = *ap;
    }
    return r;
}

}  // namespace freqpriv
