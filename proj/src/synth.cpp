#include "freqpriv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>
#include <openssl/evp.h>

#include "freqpriv/eval.hpp"

namespace freqpriv {

using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::vector<double> zipf_probabilities(int k, double s) {
    if (k < 1) throw ValidationError("zipf: need at least one class");
    std::vector<double> p(k);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        p[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

std::set<int> default_face_category_ids(int num_classes) {
    std::set<int> ids;
    for (int c = 1; c < num_classes; c += 2) ids.insert(c);
    return ids;
}

namespace {

int sample_class(const SceneConfig& cfg, const std::vector<double>& zipf_cdf, Rng& rng) {
    if (cfg.class_law == ClassLaw::Uniform) {
        return rng.uniform_int(0, cfg.num_classes - 1);
    }
    const double u = rng.uniform();
    const auto it = std::upper_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
    const auto idx = static_cast<int>(it - zipf_cdf.begin());
    return std::min(idx, cfg.num_classes - 1);
}

// Pattern values in {-1, +1} ({-0.5 outside the blob}), box-local coordinates.
// Glyph classes carry class-keyed stroke orientation and period so classes
// stay separable by local frequency content even at a few pixels.
double pattern_value(int class_id, int px, int py, int bw, int bh) {
    const bool is_glyph = class_id % 2 == 0;
    if (is_glyph) {
        const int variant = (class_id / 2) % 4;
        int bit = 0;
        switch (variant) {
            case 0: bit = py % 2; break;        // fine horizontal strokes
            case 1: bit = px % 2; break;        // fine vertical strokes
            case 2: bit = (py / 2) % 2; break;  // coarse horizontal strokes
            case 3: bit = (px / 2) % 2; break;  // coarse vertical strokes
        }
        // stroke breaks along the other axis, like character gaps
        const int gap = variant % 2 == 0 ? (px * 5 / bw) % 5 : (py * 5 / bh) % 5;
        if (gap == 4) bit ^= 1;
        return bit ? 1.0 : -1.0;
    }
    // blob: filled ellipse; odd classes differ by their interior marking
    const double cx = (bw - 1) * 0.5;
    const double cy = (bh - 1) * 0.5;
    const double rx = std::max(1.0, bw * 0.5);
    const double ry = std::max(1.0, bh * 0.5);
    const double dx = (px - cx) / rx;
    const double dy = (py - cy) / ry;
    if (dx * dx + dy * dy > 1.0) return -0.5;
    const int variant = ((class_id - 1) / 2) % 4;
    switch (variant) {
        case 0: break;                                        // plain disc
        case 1: if (std::abs(dy) < 0.3) return -1.0; break;   // horizontal bar
        case 2: if (std::abs(dx) < 0.3) return -1.0; break;   // vertical bar
        case 3: if (std::abs(dx) < 0.3 && std::abs(dy) < 0.3) return -1.0; break;
    }
    return 1.0;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, Rng& rng) {
    if (cfg.image_w < 8 || cfg.image_h < 8) {
        throw ValidationError("synth: image dims must be at least 8x8");
    }
    if (cfg.num_classes < 1 || cfg.small_fraction < 0.0 || cfg.small_fraction > 1.0 ||
        cfg.contrast_lo <= 0.0 || cfg.contrast_hi < cfg.contrast_lo) {
        throw ValidationError("synth: invalid scene config");
    }
    const int w = cfg.image_w;
    const int h = cfg.image_h;

    // background: smoothed noise plus a low-frequency gradient
    std::vector<double> bg(static_cast<size_t>(w) * h);
    const double base = 90.0 + 60.0 * rng.uniform();
    const double noise_amp = 8.0 + 12.0 * rng.uniform();
    for (double& v : bg) v = noise_amp * rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> blurred(bg.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        acc += bg[static_cast<size_t>(yy) * w + xx];
                        ++n;
                    }
                }
                blurred[static_cast<size_t>(y) * w + x] = acc / n;
            }
        }
        bg.swap(blurred);
    }
    const double gdir_x = rng.uniform(-1.0, 1.0);
    const double gdir_y = rng.uniform(-1.0, 1.0);
    const double gmag = rng.uniform(10.0, 50.0);
    const double span = std::max(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bg[static_cast<size_t>(y) * w + x] +=
                base + gmag * (x * gdir_x + y * gdir_y) / span;
        }
    }

    double scene_mean = 0.0;
    for (double v : bg) scene_mean += v;
    scene_mean /= static_cast<double>(bg.size());
    double scene_var = 0.0;
    for (double v : bg) scene_var += (v - scene_mean) * (v - scene_mean);
    scene_var /= static_cast<double>(bg.size());

    std::vector<double> zipf_cdf;
    if (cfg.class_law == ClassLaw::Zipf) {
        zipf_cdf = zipf_probabilities(cfg.num_classes, cfg.zipf_s);
        std::partial_sum(zipf_cdf.begin(), zipf_cdf.end(), zipf_cdf.begin());
    }

    Scene scene;
    const int n_objects = rng.poisson(cfg.objects_mean, cfg.objects_max);
    for (int i = 0; i < n_objects; ++i) {
        const int class_id = sample_class(cfg, zipf_cdf, rng);
        const bool small = rng.bernoulli(cfg.small_fraction);
        const double ratio = small ? rng.uniform(cfg.small_ratio_lo, cfg.small_ratio_hi)
                                   : rng.uniform(cfg.large_ratio_lo, cfg.large_ratio_hi);
        const double aspect = rng.uniform(cfg.aspect_lo, cfg.aspect_hi);
        const double target_area = ratio * w * h;
        int bw = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
        int bh = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
        bw = std::clamp(bw, 2, w);
        bh = std::clamp(bh, 2, h);

        bool placed = false;
        int bx = 0, by = 0;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            bx = rng.uniform_int(0, w - bw);
            by = rng.uniform_int(0, h - bh);
            const BBox cand{static_cast<double>(bx), static_cast<double>(by),
                            static_cast<double>(bw), static_cast<double>(bh), class_id, 0.0};
            placed = true;
            for (const BBox& b : scene.boxes) {
                if (iou(cand, b) > 0.1) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) {
            ++scene.skipped;
            continue;
        }

        const double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
        // centered pattern scaled so box variance ~= contrast * scene variance
        std::vector<double> pat(static_cast<size_t>(bw) * bh);
        for (int py = 0; py < bh; ++py) {
            for (int px = 0; px < bw; ++px) {
                pat[static_cast<size_t>(py) * bw + px] =
                    pattern_value(class_id, px, py, bw, bh);
            }
        }
        double pmean = 0.0;
        for (double v : pat) pmean += v;
        pmean /= static_cast<double>(pat.size());
        double pvar = 0.0;
        for (double v : pat) pvar += (v - pmean) * (v - pmean);
        pvar /= static_cast<double>(pat.size());
        if (pvar <= 0.0) {
            pat.back() = -pat.back();  // degenerate tiny pattern: force texture
            pmean = 0.0;
            for (double v : pat) pmean += v;
            pmean /= static_cast<double>(pat.size());
            pvar = 0.0;
            for (double v : pat) pvar += (v - pmean) * (v - pmean);
            pvar /= static_cast<double>(pat.size());
        }
        double local_mean = 0.0;
        for (int py = 0; py < bh; ++py) {
            for (int px = 0; px < bw; ++px) {
                local_mean += bg[static_cast<size_t>(by + py) * w + bx + px];
            }
        }
        local_mean /= static_cast<double>(pat.size());
        const double amp = std::sqrt(contrast * scene_var / pvar);
        for (int py = 0; py < bh; ++py) {
            for (int px = 0; px < bw; ++px) {
                bg[static_cast<size_t>(by + py) * w + bx + px] =
                    local_mean + amp * (pat[static_cast<size_t>(py) * bw + px] - pmean);
            }
        }
        scene.boxes.push_back({static_cast<double>(bx), static_cast<double>(by),
                               static_cast<double>(bw), static_cast<double>(bh),
                               class_id, 0.0});
    }

    scene.image = Raster(w, h);
    for (size_t i = 0; i < bg.size(); ++i) {
        scene.image.pixels[i] =
            static_cast<std::uint8_t>(std::clamp<long>(std::lround(bg[i]), 0, 255));
    }
    return scene;
}

namespace {

json config_to_json(const SceneConfig& cfg) {
    return json{{"image_w", cfg.image_w},
                {"image_h", cfg.image_h},
                {"num_classes", cfg.num_classes},
                {"class_law", cfg.class_law == ClassLaw::Zipf ? "zipf" : "uniform"},
                {"zipf_s", cfg.zipf_s},
                {"objects_mean", cfg.objects_mean},
                {"objects_max", cfg.objects_max},
                {"small_fraction", cfg.small_fraction},
                {"contrast_lo", cfg.contrast_lo},
                {"contrast_hi", cfg.contrast_hi},
                {"seed", cfg.seed}};
}

std::string image_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%06d.pgm", index);
    return buf;
}

}  // namespace

SynthDataset generate_dataset(const SceneConfig& cfg, int n_images) {
    if (n_images < 1) throw ValidationError("synth: n_images must be >= 1");
    SynthDataset ds;
    int next_ann_id = 1;
    for (int i = 0; i < n_images; ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        Scene scene = generate_scene(cfg, rng);
        ds.objects_skipped += scene.skipped;

        const int image_id = i + 1;
        ds.annotations.images.push_back(
            {image_id, image_file_name(image_id), cfg.image_w, cfg.image_h});
        for (const BBox& b : scene.boxes) {
            AnnObject ann;
            ann.id = next_ann_id++;
            ann.image_id = image_id;
            ann.category_id = b.class_id;
            ann.bbox[0] = b.x;
            ann.bbox[1] = b.y;
            ann.bbox[2] = b.w;
            ann.bbox[3] = b.h;
            ds.annotations.annotations.push_back(ann);
        }
        ds.images.push_back(std::move(scene.image));
    }
    for (int c = 0; c < cfg.num_classes; ++c) {
        const char* kind = c % 2 == 0 ? "text" : "face";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%02d", kind, c);
        ds.annotations.categories.push_back({c, buf});
    }

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["n_images"] = n_images;
    manifest["objects_skipped"] = ds.objects_skipped;
    manifest["annotations_sha256"] = sha256_hex(annotations_to_json(ds.annotations));
    ds.manifest_json = manifest.dump(2) + "\n";
    return ds;
}

void write_dataset(const SynthDataset& ds, const std::string& dir, bool also_ppm) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    if (ec) throw IoError("synth: cannot create " + (root / "images").string());

    for (size_t i = 0; i < ds.images.size(); ++i) {
        const auto& name = ds.annotations.images[i].file_name;
        write_pgm(ds.images[i], (root / "images" / name).string());
        if (also_ppm) {
            std::string ppm_name = name.substr(0, name.size() - 4) + ".ppm";
            write_ppm(ds.images[i], (root / "images" / ppm_name).string());
        }
    }
    save_annotations(ds.annotations, (root / "annotations.json").string());
    std::ofstream manifest(root / "manifest.json", std::ios::trunc);
    if (!manifest) throw IoError("synth: cannot write manifest.json");
    manifest << ds.manifest_json;
}

std::vector<std::pair<FeatureMap, std::vector<BBox>>> to_samples(const SynthDataset& ds) {
    std::vector<std::pair<FeatureMap, std::vector<BBox>>> out;
    std::map<int, std::vector<BBox>> boxes_by_image;
    for (const auto& a : ds.annotations.annotations) {
        boxes_by_image[a.image_id].push_back(
            {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3], a.category_id, 0.0});
    }
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const int image_id = ds.annotations.images[i].id;
        out.emplace_back(to_feature_map(ds.images[i]), boxes_by_image[image_id]);
    }
    return out;
}

}  // namespace freqpriv
