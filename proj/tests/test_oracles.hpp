#pragma once

// Brute-force reference implementations used only by tests. Kept independent
// of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "freqpriv/eval.hpp"

namespace freqpriv::test {

inline double iou_oracle(const BBox& a, const BBox& b) {
    const double x1 = std::max(a.x, b.x);
    const double y1 = std::max(a.y, b.y);
    const double x2 = std::min(a.x + a.w, b.x + b.w);
    const double y2 = std::min(a.y + a.h, b.y + b.h);
    const double iw = x2 - x1 > 0.0 ? x2 - x1 : 0.0;
    const double ih = y2 - y1 > 0.0 ? y2 - y1 : 0.0;
    const double inter = iw * ih;
    const double u = a.w * a.h + b.w * b.h - inter;
    return u > 0.0 ? inter / u : 0.0;
}

// Class-mean AP with greedy score-descending matching and 101-point
// interpolation, written as plain nested loops.
inline std::optional<double> ap_oracle(const std::vector<Instance>& preds,
                                       const std::vector<Instance>& gts,
                                       double thr) {
    std::set<int> classes;
    for (const auto& g : gts) classes.insert(g.box.class_id);
    if (classes.empty()) return std::nullopt;

    double total = 0.0;
    int n_classes = 0;
    for (int cls : classes) {
        std::vector<size_t> gt_idx;
        for (size_t i = 0; i < gts.size(); ++i) {
            if (gts[i].box.class_id == cls) gt_idx.push_back(i);
        }
        std::vector<size_t> pred_idx;
        for (size_t i = 0; i < preds.size(); ++i) {
            if (preds[i].box.class_id == cls) pred_idx.push_back(i);
        }
        std::stable_sort(pred_idx.begin(), pred_idx.end(), [&](size_t a, size_t b) {
            if (preds[a].box.score != preds[b].box.score) {
                return preds[a].box.score > preds[b].box.score;
            }
            return preds[a].image_id < preds[b].image_id;
        });

        std::map<size_t, bool> used;
        std::vector<std::pair<double, double>> pr;  // (precision, recall)
        int tp = 0, fp = 0;
        for (size_t pi : pred_idx) {
            double best = -1.0;
            size_t best_gi = 0;
            for (size_t gi : gt_idx) {
                if (used[gi]) continue;
                if (gts[gi].image_id != preds[pi].image_id) continue;
                const double v = iou_oracle(preds[pi].box, gts[gi].box);
                if (v >= thr && v > best) {
                    best = v;
                    best_gi = gi;
                }
            }
            if (best >= 0.0) {
                used[best_gi] = true;
                ++tp;
            } else {
                ++fp;
            }
            pr.emplace_back(static_cast<double>(tp) / (tp + fp),
                            static_cast<double>(tp) / gt_idx.size());
        }

        double ap = 0.0;
        for (int g = 0; g <= 100; ++g) {
            const double r = g / 100.0;
            double best_p = 0.0;
            for (const auto& [p, rec] : pr) {
                if (rec >= r - 1e-12) best_p = std::max(best_p, p);
            }
            ap += best_p;
        }
        total += ap / 101.0;
        ++n_classes;
    }
    return total / n_classes;
}

}  // namespace freqpriv::test
