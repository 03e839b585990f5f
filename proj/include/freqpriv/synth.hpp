#pragma once

#include <cstdint>
#include <set>
#include <utility>

#include "freqpriv/bbox.hpp"
#include "freqpriv/image.hpp"
#include "freqpriv/rng.hpp"
#include "freqpriv/stats.hpp"

namespace freqpriv {

enum class ClassLaw { Uniform, Zipf };

// Generator parameters for synthetic privacy-like scenes: small glyph blocks
// (high-frequency stroke patterns) and blob objects over low-contrast
// cluttered backgrounds.
struct SceneConfig {
    int image_w = 64;
    int image_h = 64;
    int num_classes = 30;
    ClassLaw class_law = ClassLaw::Uniform;
    double zipf_s = 1.0;
    double objects_mean = 3.0;  // objects per image (truncated Poisson)
    int objects_max = 8;
    double small_fraction = 0.6;  // share of objects with area ratio < 0.10
    double contrast_lo = 0.2;     // object variance / scene variance range
    double contrast_hi = 0.8;
    // area-ratio and aspect sampling ranges for the two size regimes
    double small_ratio_lo = 0.004;
    double small_ratio_hi = 0.06;
    double large_ratio_lo = 0.11;
    double large_ratio_hi = 0.18;
    double aspect_lo = 0.6;
    double aspect_hi = 1.6;
    std::uint64_t seed = 0;
};

struct Scene {
    Raster image;
    std::vector<BBox> boxes;
    int skipped = 0;  // placements abandoned after 50 attempts
};

Scene generate_scene(const SceneConfig& cfg, Rng& rng);

struct SynthDataset {
    std::vector<Raster> images;
    AnnotationSet annotations;
    int objects_skipped = 0;
    std::string manifest_json;
};

// Deterministic: per-image RNG streams are derived from the master seed, so
// identical (config, n_images) reproduce byte-identical output.
SynthDataset generate_dataset(const SceneConfig& cfg, int n_images);

// Writes images/ *.pgm (optionally *.ppm), annotations.json and manifest.json.
void write_dataset(const SynthDataset& ds, const std::string& dir,
                   bool also_ppm = false);

// (image, boxes) pairs for feeding the detector without touching disk.
std::vector<std::pair<FeatureMap, std::vector<BBox>>> to_samples(const SynthDataset& ds);

// Rank probabilities p(k) proportional to 1/(k+1)^s for k in [0, K).
std::vector<double> zipf_probabilities(int k, double s);

// Blob ("face") classes are the odd ids by convention.
std::set<int> default_face_category_ids(int num_classes);

std::string sha256_hex(const std::string& bytes);

}  // namespace freqpriv
