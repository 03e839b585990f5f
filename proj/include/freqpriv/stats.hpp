#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "freqpriv/image.hpp"

namespace freqpriv {

// COCO-style annotation subset.
struct AnnImage {
    int id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
};

struct AnnObject {
    int id = 0;
    int image_id = 0;
    int category_id = 0;
    double bbox[4] = {0, 0, 0, 0};  // x, y, w, h in pixels
};

struct AnnCategory {
    int id = 0;
    std::string name;
};

struct AnnotationSet {
    std::vector<AnnImage> images;
    std::vector<AnnObject> annotations;
    std::vector<AnnCategory> categories;
    // Validator findings (out-of-bounds or degenerate boxes); collected, not dropped.
    std::vector<std::string> violations;
};

// Parses and validates; referential-integrity failures throw ValidationError
// naming the offending id, box violations are collected in `violations`.
AnnotationSet load_annotations(const std::string& path);
AnnotationSet parse_annotations(const std::string& json_text);
std::string annotations_to_json(const AnnotationSet& set);
void save_annotations(const AnnotationSet& set, const std::string& path);

// Population standard deviation over mean of per-class instance counts.
double class_cv(const std::vector<long long>& counts);

// Share of instances held by the top ceil(fraction*K) classes.
double top_fraction_concentration(const std::vector<long long>& counts,
                                  double fraction = 0.2);

// Box area over image area.
double normalized_object_size(const AnnObject& ann, const AnnImage& image);

// Population pixel variance inside the box (clamped to the enclosing integer
// window) over the population variance of the whole image. nullopt when the
// clamped window is empty.
std::optional<double> relative_contrast(const Raster& image, const AnnObject& ann);

// ln(max box area / min box area); absent for images with fewer than 2 boxes.
std::optional<double> size_disparity(const std::vector<const AnnObject*>& boxes);

struct ScaleSpread {
    int category_id = 0;
    int count = 0;
    double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};
std::vector<ScaleSpread> class_scale_spread(const AnnotationSet& set);

// Faces-per-image histogram over buckets {1, 2, ..., 31, 32+}; images with
// zero faces are excluded.
struct FaceDensityHistogram {
    static constexpr int kBuckets = 32;  // bucket i: i+1 faces; last: 32+
    std::array<long long, kBuckets> image_count{};
    std::array<long long, kBuckets> instance_count{};
};
FaceDensityHistogram face_density_histogram(const AnnotationSet& set,
                                            const std::set<int>& face_category_ids);

struct ResolutionRow {
    int image_id = 0;
    int width = 0;
    int height = 0;
    double aspect = 0.0;  // h / w
};
std::vector<ResolutionRow> resolution_table(const AnnotationSet& set);

std::map<int, long long> per_class_counts(const AnnotationSet& set);

// Aggregate report over one annotation set. Contrast rows are filled only for
// images whose rasters are supplied.
struct StatsReport {
    long long n_images = 0;
    long long n_instances = 0;
    std::map<int, long long> class_counts;
    double cv = 0.0;
    double top20 = 0.0;
    std::vector<ResolutionRow> resolution;
    struct SizeRow { int annotation_id, image_id, category_id; double ratio; };
    std::vector<SizeRow> sizes;
    struct ContrastRow { int annotation_id, image_id; double contrast; };
    std::vector<ContrastRow> contrast;
    struct DisparityRow { int image_id; double value; };
    std::vector<DisparityRow> disparity;
    std::vector<ScaleSpread> scale_spread;
    FaceDensityHistogram face_density;
    std::set<int> face_category_ids;
};

StatsReport compute_stats(const AnnotationSet& set,
                          const std::map<int, Raster>& rasters_by_image_id,
                          const std::set<int>& face_category_ids);

// One CSV per statistic family plus summary.json, written under out_dir.
void write_stats_outputs(const StatsReport& report, const std::string& out_dir);

}  // namespace freqpriv
