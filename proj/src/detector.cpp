#include "freqpriv/detector.hpp"

#include <algorithm>
#include <cmath>

#include "freqpriv/eval.hpp"
#include "freqpriv/rng.hpp"

namespace freqpriv {

namespace {

void fill_uniform(std::vector<double>& v, double bound, Rng& rng) {
    for (double& x : v) x = rng.uniform(-bound, bound);
}

double stable_bce(double logit, double label) {
    // max(z,0) - z*y + log(1 + exp(-|z|))
    return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double smooth_l1(double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double d) {
    if (d > 1.0) return 1.0;
    if (d < -1.0) return -1.0;
    return d;
}

}  // namespace

DetectorModel make_model(const ModelConfig& cfg) {
    if (cfg.image_h % kStride != 0 || cfg.image_w % kStride != 0) {
        throw ValidationError("model: image dims must be divisible by 4");
    }
    if (cfg.num_classes < 1 || cfg.channels < 1) {
        throw ValidationError("model: channels and num_classes must be >= 1");
    }
    if (cfg.beta < 0.0) throw ValidationError("model: beta must be >= 0");

    DetectorModel m;
    m.cfg = cfg;
    m.grid_h = cfg.image_h / kStride;
    m.grid_w = cfg.image_w / kStride;

    Rng rng(cfg.init_seed);
    m.stem1 = Conv3x3(cfg.channels, cfg.in_channels);
    fill_uniform(m.stem1.weight, std::sqrt(6.0 / (cfg.in_channels * 9.0)), rng);
    m.stem2 = Conv3x3(cfg.channels, cfg.channels);
    fill_uniform(m.stem2.weight, std::sqrt(6.0 / (cfg.channels * 9.0)), rng);

    const double gate_logit = cfg.gate_trainable ? cfg.gate_init_logit : 40.0;
    m.fdaf = FdafBlock(cfg.channels, m.grid_h, m.grid_w, gate_logit);

    m.head = Conv1x1(m.head_channels(), cfg.channels);
    fill_uniform(m.head.weight, std::sqrt(6.0 / cfg.channels), rng);
    m.head.bias[0] = -4.0;  // objectness starts near the sparse base rate
    return m;
}

std::vector<ParamRef> param_groups(DetectorModel& m) {
    std::vector<ParamRef> groups;
    groups.push_back({"stem1.weight", &m.stem1.weight, true});
    groups.push_back({"stem1.bias", &m.stem1.bias, true});
    groups.push_back({"stem2.weight", &m.stem2.weight, true});
    groups.push_back({"stem2.bias", &m.stem2.bias, true});
    if (m.cfg.has_fdaf) {
        groups.push_back({"fdaf.gate.logits", &m.fdaf.gate.logits, m.cfg.gate_trainable});
        groups.push_back({"fdaf.fusion.weight", &m.fdaf.fusion.weight, true});
        groups.push_back({"fdaf.fusion.bias", &m.fdaf.fusion.bias, true});
    }
    groups.push_back({"head.weight", &m.head.weight, true});
    groups.push_back({"head.bias", &m.head.bias, true});
    return groups;
}

void set_params(DetectorModel& m, const std::vector<std::vector<double>>& values) {
    auto groups = param_groups(m);
    if (values.size() != groups.size()) {
        throw ShapeError("set_params: group count mismatch");
    }
    for (size_t g = 0; g < groups.size(); ++g) {
        if (values[g].size() != groups[g].values->size()) {
            throw ShapeError("set_params: size mismatch for " + groups[g].name);
        }
        *groups[g].values = values[g];
    }
}

namespace {

void check_input(const DetectorModel& m, const FeatureMap& image) {
    if (image.channels != m.cfg.in_channels) {
        throw ShapeError("forward: expected " + std::to_string(m.cfg.in_channels) +
                         " input channels, got " + std::to_string(image.channels));
    }
    if (image.height != m.grid_h * kStride || image.width != m.grid_w * kStride) {
        throw ShapeError("forward: image " + image.shape_str() +
                         " does not match model resolution " +
                         std::to_string(m.grid_h * kStride) + "x" +
                         std::to_string(m.grid_w * kStride));
    }
}

}  // namespace

ForwardResult forward(const DetectorModel& m, const FeatureMap& image) {
    check_input(m, image);
    const FeatureMap f1 = leaky_relu(conv3x3s2(image, m.stem1), kLeakySlope);
    const FeatureMap f2 = leaky_relu(conv3x3s2(f1, m.stem2), kLeakySlope);
    ForwardResult r;
    r.neck = m.cfg.has_fdaf ? fdaf_forward(f2, m.fdaf) : f2;
    r.head = conv1x1(r.neck, m.head);
    return r;
}

std::vector<BBox> decode(const FeatureMap& head, double score_threshold,
                         int image_w, int image_h) {
    if (score_threshold < 0.0 || score_threshold > 1.0) {
        throw ValidationError("decode: score threshold must be in [0,1]");
    }
    const int k = head.channels - 5;
    if (k < 1) throw ShapeError("decode: head map must have at least 6 channels");
    const int gh = head.height;
    const int gw = head.width;

    std::vector<BBox> candidates;
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            const double obj = sigmoid(head.at(0, gy, gx));
            double zmax = head.at(1, gy, gx);
            int best = 0;
            for (int c = 1; c < k; ++c) {
                const double z = head.at(1 + c, gy, gx);
                if (z > zmax) { zmax = z; best = c; }
            }
            double denom = 0.0;
            for (int c = 0; c < k; ++c) denom += std::exp(head.at(1 + c, gy, gx) - zmax);
            const double score = obj / denom;  // sigmoid(obj) * max softmax prob
            if (score < score_threshold) continue;

            const double tx = head.at(1 + k, gy, gx);
            const double ty = head.at(2 + k, gy, gx);
            const double tw = std::clamp(head.at(3 + k, gy, gx), -30.0, 30.0);
            const double th = std::clamp(head.at(4 + k, gy, gx), -30.0, 30.0);
            const double cx = (gx + 0.5 + std::tanh(tx)) * kStride;
            const double cy = (gy + 0.5 + std::tanh(ty)) * kStride;
            const double bw = std::exp(tw) * kStride;
            const double bh = std::exp(th) * kStride;
            const double x1 = std::max(0.0, cx - 0.5 * bw);
            const double y1 = std::max(0.0, cy - 0.5 * bh);
            const double x2 = std::min(static_cast<double>(image_w), cx + 0.5 * bw);
            const double y2 = std::min(static_cast<double>(image_h), cy + 0.5 * bh);
            if (x2 - x1 <= 0.0 || y2 - y1 <= 0.0) continue;
            candidates.push_back({x1, y1, x2 - x1, y2 - y1, best, score});
        }
    }

    // greedy same-class NMS
    std::vector<size_t> order(candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return candidates[a].score > candidates[b].score;
    });
    std::vector<BBox> kept;
    for (size_t idx : order) {
        const BBox& c = candidates[idx];
        bool suppressed = false;
        for (const BBox& kb : kept) {
            if (kb.class_id == c.class_id && iou(kb, c) > kNmsIou) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(c);
    }
    return kept;
}

Assignment assign_targets(const std::vector<BBox>& gt, int grid_h, int grid_w,
                          int image_w, int image_h, int num_classes) {
    Assignment out;
    out.grid_h = grid_h;
    out.grid_w = grid_w;
    out.num_classes = num_classes;

    std::vector<size_t> order(gt.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const BBox& ba = gt[a];
        const BBox& bb = gt[b];
        if (ba.area() != bb.area()) return ba.area() > bb.area();
        if (ba.x != bb.x) return ba.x < bb.x;
        if (ba.y != bb.y) return ba.y < bb.y;
        if (ba.w != bb.w) return ba.w < bb.w;
        if (ba.h != bb.h) return ba.h < bb.h;
        return ba.class_id < bb.class_id;
    });

    std::vector<bool> claimed(static_cast<size_t>(grid_h) * grid_w, false);
    for (size_t idx : order) {
        const BBox& b = gt[idx];
        if (b.w <= 0.0 || b.h <= 0.0) {
            out.rejected.push_back("gt box with nonpositive extent skipped");
            continue;
        }
        const double cx = b.cx();
        const double cy = b.cy();
        if (cx < 0.0 || cx >= image_w || cy < 0.0 || cy >= image_h) {
            out.rejected.push_back("gt center (" + std::to_string(cx) + "," +
                                   std::to_string(cy) + ") outside image");
            continue;
        }
        if (b.class_id < 0 || b.class_id >= num_classes) {
            out.rejected.push_back("gt class " + std::to_string(b.class_id) +
                                   " out of range");
            continue;
        }
        const int gx = std::min(static_cast<int>(cx / kStride), grid_w - 1);
        const int gy = std::min(static_cast<int>(cy / kStride), grid_h - 1);
        const int cell = gy * grid_w + gx;
        if (claimed[cell]) continue;  // larger-area box already owns this cell
        claimed[cell] = true;

        Assignment::Positive p;
        p.cell = cell;
        p.class_id = b.class_id;
        p.t[0] = std::atanh(cx / kStride - gx - 0.5);
        p.t[1] = std::atanh(cy / kStride - gy - 0.5);
        p.t[2] = std::log(b.w / kStride);
        p.t[3] = std::log(b.h / kStride);
        out.positives.push_back(p);
    }
    std::sort(out.positives.begin(), out.positives.end(),
              [](const Assignment::Positive& a, const Assignment::Positive& b) {
                  return a.cell < b.cell;
              });
    return out;
}

namespace {

DetLossTerms detection_loss_terms(const FeatureMap& head, const Assignment& assign,
                                  FeatureMap* grad) {
    const int k = assign.num_classes;
    const int gh = head.height;
    const int gw = head.width;
    if (head.channels != 1 + k + 4 || gh != assign.grid_h || gw != assign.grid_w) {
        throw ShapeError("detection_loss: head map does not match assignment grid");
    }
    const int n_cells = gh * gw;
    const int n_pos = static_cast<int>(assign.positives.size());

    std::vector<char> is_pos(static_cast<size_t>(n_cells), 0);
    for (const auto& p : assign.positives) is_pos[p.cell] = 1;

    DetLossTerms terms;
    // objectness BCE over all cells
    for (int cell = 0; cell < n_cells; ++cell) {
        const int gy = cell / gw;
        const int gx = cell % gw;
        const double z = head.at(0, gy, gx);
        const double y = is_pos[cell] ? 1.0 : 0.0;
        terms.objectness += stable_bce(z, y);
        if (grad) grad->at(0, gy, gx) += (sigmoid(z) - y) / n_cells;
    }
    terms.objectness /= n_cells;

    // class CE + box smooth-L1 at positives
    for (const auto& p : assign.positives) {
        const int gy = p.cell / gw;
        const int gx = p.cell % gw;
        double zmax = head.at(1, gy, gx);
        for (int c = 1; c < k; ++c) zmax = std::max(zmax, head.at(1 + c, gy, gx));
        double denom = 0.0;
        for (int c = 0; c < k; ++c) denom += std::exp(head.at(1 + c, gy, gx) - zmax);
        const double lse = zmax + std::log(denom);
        terms.classification += lse - head.at(1 + p.class_id, gy, gx);
        for (int j = 0; j < 4; ++j) {
            const double d = head.at(1 + k + j, gy, gx) - p.t[j];
            terms.box += smooth_l1(d);
            if (grad) grad->at(1 + k + j, gy, gx) += smooth_l1_grad(d) / n_pos;
        }
        if (grad) {
            for (int c = 0; c < k; ++c) {
                const double soft = std::exp(head.at(1 + c, gy, gx) - zmax) / denom;
                grad->at(1 + c, gy, gx) +=
                    (soft - (c == p.class_id ? 1.0 : 0.0)) / n_pos;
            }
        }
    }
    if (n_pos > 0) {
        terms.classification /= n_pos;
        terms.box /= n_pos;
    }
    return terms;
}

}  // namespace

DetLossTerms detection_loss(const FeatureMap& head, const Assignment& assign) {
    return detection_loss_terms(head, assign, nullptr);
}

SVar detection_loss(Tape& t, Var head, const Assignment& assign, DetLossTerms& terms) {
    terms = detection_loss_terms(t.value(head), assign, nullptr);
    return t.custom_scalar(
        head, terms.total(), "detection_loss",
        [assign](const FeatureMap& head_value, double upstream, FeatureMap& grad_x) {
            FeatureMap g(head_value.channels, head_value.height, head_value.width);
            detection_loss_terms(head_value, assign, &g);
            for (size_t i = 0; i < g.size(); ++i) {
                grad_x.values[i] += upstream * g.values[i];
            }
        });
}

namespace {

SampleWindow box_window(const BBox& box) {
    return {box.y / kStride, box.x / kStride, box.h / kStride, box.w / kStride};
}

}  // namespace

std::optional<FeatureMap> roi_crop(const FeatureMap& feature, const BBox& box, int s) {
    const SampleWindow win = box_window(box);
    if (win.h <= 0.0 || win.w <= 0.0) return std::nullopt;
    return window_resample(feature, win, s, s);
}

LossPlan plan_loss(const DetectorModel& m, const ForwardResult& fwd,
                   const std::vector<BBox>& gt, int image_w, int image_h,
                   double decode_threshold, double match_iou) {
    LossPlan plan;
    plan.assign = assign_targets(gt, m.grid_h, m.grid_w, image_w, image_h,
                                 m.cfg.num_classes);
    if (m.cfg.beta <= 0.0 || gt.empty()) return plan;

    const std::vector<BBox> preds = decode(fwd.head, decode_threshold, image_w, image_h);
    struct Cand { double v; size_t pi, gi; };
    std::vector<Cand> cands;
    for (size_t pi = 0; pi < preds.size(); ++pi) {
        for (size_t gi = 0; gi < gt.size(); ++gi) {
            const double v = iou(preds[pi], gt[gi]);
            if (v >= match_iou) cands.push_back({v, pi, gi});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.v != b.v) return a.v > b.v;
        if (a.pi != b.pi) return a.pi < b.pi;
        return a.gi < b.gi;
    });
    std::vector<bool> pred_used(preds.size(), false), gt_used(gt.size(), false);
    for (const Cand& c : cands) {
        if (pred_used[c.pi] || gt_used[c.gi]) continue;
        pred_used[c.pi] = true;
        gt_used[c.gi] = true;
        const SampleWindow pw = box_window(preds[c.pi]);
        const auto target_crop = roi_crop(fwd.neck, gt[c.gi], m.cfg.roi_size);
        if (pw.h <= 0.0 || pw.w <= 0.0 || !target_crop.has_value()) {
            ++plan.n_skipped_crops;
            continue;
        }
        plan.freq_pairs.push_back({preds[c.pi], gt[c.gi], dft2(*target_crop)});
    }
    return plan;
}

TapeEval eval_total_loss(Tape& t, const DetectorModel& m, const FeatureMap& image,
                         const LossPlan& plan) {
    check_input(m, image);
    TapeEval ev;

    // parameter leaves in param_groups order
    DetectorModel& mm = const_cast<DetectorModel&>(m);
    std::vector<Var> leaves;
    for (const ParamRef& g : param_groups(mm)) {
        const Var v = t.leaf_vector(*g.values);
        leaves.push_back(v);
        ev.params.emplace_back(g.name, v);
    }
    int li = 0;
    const Var stem1_w = leaves[li++], stem1_b = leaves[li++];
    const Var stem2_w = leaves[li++], stem2_b = leaves[li++];
    Var gate_l{}, fusion_w{}, fusion_b{};
    if (m.cfg.has_fdaf) {
        gate_l = leaves[li++];
        fusion_w = leaves[li++];
        fusion_b = leaves[li++];
    }
    const Var head_w = leaves[li++], head_b = leaves[li++];

    const Var input = t.leaf(image);
    const Var f1 = t.leaky_relu(t.conv3x3s2(input, stem1_w, stem1_b, m.cfg.channels),
                                kLeakySlope);
    const Var f2 = t.leaky_relu(t.conv3x3s2(f1, stem2_w, stem2_b, m.cfg.channels),
                                kLeakySlope);
    ev.neck = m.cfg.has_fdaf
                  ? fdaf_forward(t, f2, gate_l, fusion_w, fusion_b, m.cfg.channels)
                  : f2;
    ev.head = t.conv1x1(ev.neck, head_w, head_b, m.head_channels());

    SVar det = detection_loss(t, ev.head, plan.assign, ev.breakdown.det_terms);
    ev.breakdown.det = t.value(det);

    ev.breakdown.matched_pairs = static_cast<int>(plan.freq_pairs.size());
    ev.breakdown.no_freq_targets = plan.freq_pairs.empty();
    SVar total = det;
    if (!plan.freq_pairs.empty()) {
        const int s = m.cfg.roi_size;
        const std::vector<double> binw = squared_bin_weights(s, s, m.cfg.lambda);
        SVar sum = t.scalar_const(0.0);
        for (const auto& pair : plan.freq_pairs) {
            const Var crop = t.window_resample(ev.neck, box_window(pair.pred_box), s, s);
            // target branch is gradient-stopped: the plan holds its spectrum
            sum = t.add(sum, t.weighted_spectral_sqdist(t.dft2(crop), pair.target, binw));
        }
        const SVar freq = t.scale(sum, 1.0 / static_cast<double>(plan.freq_pairs.size()));
        ev.breakdown.freq = t.value(freq);
        total = t.add(det, t.scale(freq, m.cfg.beta));
    }
    ev.loss = total;
    ev.breakdown.total = t.value(total);
    return ev;
}

LossBreakdown total_loss(const DetectorModel& m, const FeatureMap& image,
                         const std::vector<BBox>& gt, double decode_threshold,
                         double match_iou) {
    const ForwardResult fwd = forward(m, image);
    const LossPlan plan = plan_loss(m, fwd, gt, image.width, image.height,
                                    decode_threshold, match_iou);
    Tape t;
    return eval_total_loss(t, m, image, plan).breakdown;
}

namespace {

TrainSample hflip_sample(const TrainSample& s) {
    TrainSample out;
    out.image = FeatureMap(s.image.channels, s.image.height, s.image.width);
    for (int c = 0; c < s.image.channels; ++c) {
        for (int y = 0; y < s.image.height; ++y) {
            for (int x = 0; x < s.image.width; ++x) {
                out.image.at(c, y, x) = s.image.at(c, y, s.image.width - 1 - x);
            }
        }
    }
    out.gt = s.gt;
    for (BBox& b : out.gt) b.x = s.image.width - b.x - b.w;
    return out;
}

}  // namespace

TrainResult train(DetectorModel& m, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg) {
    if (data.empty()) throw ValidationError("train: dataset is empty");
    if (cfg.lr < 0.0 || cfg.momentum < 0.0 || cfg.weight_decay < 0.0 ||
        cfg.epochs < 1 || cfg.batch_size < 1) {
        throw ValidationError("train: invalid config");
    }
    m.cfg.beta = cfg.beta;
    m.cfg.lambda = cfg.lambda;
    m.cfg.roi_size = cfg.roi_size;

    auto groups = param_groups(m);
    std::vector<std::vector<double>> velocity(groups.size());
    std::vector<std::vector<double>> grad_acc(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) {
        velocity[g].assign(groups[g].values->size(), 0.0);
        grad_acc[g].resize(groups[g].values->size());
    }

    Rng rng(cfg.seed);
    TrainResult result;
    int step = 0;
    const int image_w = m.grid_w * kStride;
    const int image_h = m.grid_h * kStride;

    std::vector<size_t> perm(data.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates shuffle driven by the run RNG
        for (size_t i = perm.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(perm[i - 1], perm[j]);
        }
        for (size_t batch_start = 0; batch_start < perm.size();
             batch_start += cfg.batch_size) {
            const size_t batch_end =
                std::min(perm.size(), batch_start + cfg.batch_size);
            const int batch_n = static_cast<int>(batch_end - batch_start);
            for (auto& g : grad_acc) std::fill(g.begin(), g.end(), 0.0);

            StepTrace trace;
            trace.step = step;
            const bool freq_enabled = step >= cfg.freq_warmup_steps;

            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                TrainSample sample = data[perm[bi]];
                if (cfg.hflip && rng.bernoulli(0.5)) sample = hflip_sample(sample);

                const ForwardResult fwd = forward(m, sample.image);
                DetectorModel plan_model = m;  // beta gating for warmup
                if (!freq_enabled) plan_model.cfg.beta = 0.0;
                const LossPlan plan =
                    plan_loss(plan_model, fwd, sample.gt, image_w, image_h,
                              cfg.decode_threshold, cfg.match_iou);

                Tape tape;
                TapeEval ev = eval_total_loss(tape, m, sample.image, plan);
                if (!std::isfinite(ev.breakdown.total)) {
                    throw TrainDivergence(step, ev.breakdown);
                }
                tape.backward(ev.loss);

                const double inv_n = 1.0 / batch_n;
                for (size_t g = 0; g < groups.size(); ++g) {
                    const auto& gv = tape.grad(ev.params[g].second).values;
                    for (size_t i = 0; i < gv.size(); ++i) grad_acc[g][i] += inv_n * gv[i];
                }
                trace.total += inv_n * ev.breakdown.total;
                trace.det += inv_n * ev.breakdown.det;
                trace.freq_term += inv_n * m.cfg.beta * ev.breakdown.freq;
                trace.matched_pairs += ev.breakdown.matched_pairs;
            }

            if (cfg.grad_clip_norm > 0.0) {
                double sq = 0.0;
                for (const auto& g : grad_acc) {
                    for (double x : g) sq += x * x;
                }
                const double norm = std::sqrt(sq);
                if (norm > cfg.grad_clip_norm) {
                    const double scale = cfg.grad_clip_norm / norm;
                    for (auto& g : grad_acc) {
                        for (double& x : g) x *= scale;
                    }
                }
            }

            for (size_t g = 0; g < groups.size(); ++g) {
                if (!groups[g].trainable) continue;
                auto& p = *groups[g].values;
                auto& v = velocity[g];
                for (size_t i = 0; i < p.size(); ++i) {
                    v[i] = cfg.momentum * v[i] + grad_acc[g][i];
                    p[i] = (1.0 - cfg.weight_decay) * p[i] - cfg.lr * v[i];
                }
            }
            result.trace.push_back(trace);
            ++step;
        }
    }
    result.steps = step;
    return result;
}

}  // namespace freqpriv
