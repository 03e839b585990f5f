#include "freqpriv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace freqpriv {

using nlohmann::json;

namespace {

std::string num(double v) { return json(v).dump(); }  // shortest round-trip form

double population_variance(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / n;
}

}  // namespace

AnnotationSet parse_annotations(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("annotations: ") + e.what());
    }
    AnnotationSet set;
    for (const auto& j : root.value("images", json::array())) {
        AnnImage img;
        img.id = j.at("id").get<int>();
        img.file_name = j.value("file_name", "");
        img.width = j.at("width").get<int>();
        img.height = j.at("height").get<int>();
        set.images.push_back(std::move(img));
    }
    for (const auto& j : root.value("categories", json::array())) {
        AnnCategory cat;
        cat.id = j.at("id").get<int>();
        cat.name = j.value("name", "");
        set.categories.push_back(std::move(cat));
    }
    std::set<int> image_ids, category_ids;
    for (const auto& i : set.images) image_ids.insert(i.id);
    for (const auto& c : set.categories) category_ids.insert(c.id);

    std::map<int, const AnnImage*> image_by_id;
    for (const auto& i : set.images) image_by_id[i.id] = &i;

    for (const auto& j : root.value("annotations", json::array())) {
        AnnObject a;
        a.id = j.at("id").get<int>();
        a.image_id = j.at("image_id").get<int>();
        a.category_id = j.at("category_id").get<int>();
        const auto& bb = j.at("bbox");
        if (!bb.is_array() || bb.size() != 4) {
            throw ValidationError("annotations: annotation " + std::to_string(a.id) +
                                  " bbox must be [x,y,w,h]");
        }
        for (int k = 0; k < 4; ++k) a.bbox[k] = bb[k].get<double>();

        if (!image_ids.count(a.image_id)) {
            throw ValidationError("annotations: annotation " + std::to_string(a.id) +
                                  " references missing image_id " +
                                  std::to_string(a.image_id));
        }
        if (!category_ids.count(a.category_id)) {
            throw ValidationError("annotations: annotation " + std::to_string(a.id) +
                                  " references missing category_id " +
                                  std::to_string(a.category_id));
        }
        const AnnImage* img = image_by_id[a.image_id];
        if (a.bbox[2] <= 0.0 || a.bbox[3] <= 0.0) {
            set.violations.push_back("annotation " + std::to_string(a.id) +
                                     ": nonpositive box extent");
        } else if (a.bbox[0] < 0.0 || a.bbox[1] < 0.0 ||
                   a.bbox[0] + a.bbox[2] > img->width ||
                   a.bbox[1] + a.bbox[3] > img->height) {
            set.violations.push_back("annotation " + std::to_string(a.id) +
                                     ": box outside image bounds");
        }
        set.annotations.push_back(a);
    }
    return set;
}

AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("annotations: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_annotations(text);
}

std::string annotations_to_json(const AnnotationSet& set) {
    json root;
    root["images"] = json::array();
    for (const auto& i : set.images) {
        root["images"].push_back({{"id", i.id},
                                  {"file_name", i.file_name},
                                  {"width", i.width},
                                  {"height", i.height}});
    }
    root["annotations"] = json::array();
    for (const auto& a : set.annotations) {
        root["annotations"].push_back(
            {{"id", a.id},
             {"image_id", a.image_id},
             {"category_id", a.category_id},
             {"bbox", {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]}}});
    }
    root["categories"] = json::array();
    for (const auto& c : set.categories) {
        root["categories"].push_back({{"id", c.id}, {"name", c.name}});
    }
    return root.dump(2) + "\n";
}

void save_annotations(const AnnotationSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("annotations: cannot open " + path + " for writing");
    out << annotations_to_json(set);
}

double class_cv(const std::vector<long long>& counts) {
    if (counts.empty()) throw ValidationError("class_cv: no classes");
    double mean = 0.0;
    for (long long c : counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(counts.size());
    if (mean <= 0.0) throw NumericError("class_cv: undefined for all-zero counts");
    double var = 0.0;
    for (long long c : counts) {
        const double d = static_cast<double>(c) - mean;
        var += d * d;
    }
    var /= static_cast<double>(counts.size());
    return std::sqrt(var) / mean;
}

double top_fraction_concentration(const std::vector<long long>& counts,
                                  double fraction) {
    if (counts.empty()) throw ValidationError("top_fraction_concentration: no classes");
    if (fraction <= 0.0 || fraction > 1.0) {
        throw ValidationError("top_fraction_concentration: fraction must be in (0,1]");
    }
    long long total = 0;
    for (long long c : counts) total += c;
    if (total <= 0) throw NumericError("top_fraction_concentration: undefined for zero total");
    std::vector<long long> sorted = counts;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto take = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(counts.size())));
    long long head = 0;
    for (size_t i = 0; i < take && i < sorted.size(); ++i) head += sorted[i];
    return static_cast<double>(head) / static_cast<double>(total);
}

double normalized_object_size(const AnnObject& ann, const AnnImage& image) {
    const double img_area = static_cast<double>(image.width) * image.height;
    if (img_area <= 0.0) throw NumericError("normalized_object_size: zero image area");
    return (ann.bbox[2] * ann.bbox[3]) / img_area;
}

std::optional<double> relative_contrast(const Raster& image, const AnnObject& ann) {
    std::vector<double> all(image.pixels.begin(), image.pixels.end());
    const double global_var = population_variance(all);
    if (global_var <= 0.0) {
        throw NumericError("relative_contrast: constant image has zero variance");
    }
    // clamp to the enclosing integer pixel window
    const int x0 = std::max(0, static_cast<int>(std::floor(ann.bbox[0])));
    const int y0 = std::max(0, static_cast<int>(std::floor(ann.bbox[1])));
    const int x1 = std::min(image.width, static_cast<int>(std::ceil(ann.bbox[0] + ann.bbox[2])));
    const int y1 = std::min(image.height, static_cast<int>(std::ceil(ann.bbox[1] + ann.bbox[3])));
    if (x1 <= x0 || y1 <= y0) return std::nullopt;

    std::vector<double> box;
    box.reserve(static_cast<size_t>(x1 - x0) * (y1 - y0));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) box.push_back(image.at(y, x));
    }
    return population_variance(box) / global_var;
}

std::optional<double> size_disparity(const std::vector<const AnnObject*>& boxes) {
    if (boxes.size() < 2) return std::nullopt;
    double amin = boxes[0]->bbox[2] * boxes[0]->bbox[3];
    double amax = amin;
    for (const AnnObject* b : boxes) {
        const double a = b->bbox[2] * b->bbox[3];
        amin = std::min(amin, a);
        amax = std::max(amax, a);
    }
    if (amin <= 0.0) throw NumericError("size_disparity: zero box area");
    return std::log(amax / amin);
}

namespace {

double quantile_linear(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted[0];
    const double idx = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(idx));
    const double frac = idx - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

std::vector<ScaleSpread> class_scale_spread(const AnnotationSet& set) {
    std::map<int, const AnnImage*> image_by_id;
    for (const auto& i : set.images) image_by_id[i.id] = &i;
    std::map<int, std::vector<double>> ratios;
    for (const auto& a : set.annotations) {
        ratios[a.category_id].push_back(
            normalized_object_size(a, *image_by_id.at(a.image_id)));
    }
    std::vector<ScaleSpread> out;
    for (auto& [cat, rs] : ratios) {
        std::sort(rs.begin(), rs.end());
        ScaleSpread s;
        s.category_id = cat;
        s.count = static_cast<int>(rs.size());
        s.min = rs.front();
        s.q25 = quantile_linear(rs, 0.25);
        s.median = quantile_linear(rs, 0.5);
        s.q75 = quantile_linear(rs, 0.75);
        s.max = rs.back();
        out.push_back(s);
    }
    return out;
}

FaceDensityHistogram face_density_histogram(const AnnotationSet& set,
                                            const std::set<int>& face_category_ids) {
    std::map<int, long long> faces_per_image;
    for (const auto& a : set.annotations) {
        if (face_category_ids.count(a.category_id)) ++faces_per_image[a.image_id];
    }
    FaceDensityHistogram h;
    for (const auto& [img, n] : faces_per_image) {
        const int bucket = n >= 32 ? 31 : static_cast<int>(n) - 1;
        h.image_count[bucket] += 1;
        h.instance_count[bucket] += n;
    }
    return h;
}

std::vector<ResolutionRow> resolution_table(const AnnotationSet& set) {
    std::vector<ResolutionRow> rows;
    for (const auto& i : set.images) {
        rows.push_back({i.id, i.width, i.height,
                        static_cast<double>(i.height) / static_cast<double>(i.width)});
    }
    return rows;
}

std::map<int, long long> per_class_counts(const AnnotationSet& set) {
    std::map<int, long long> counts;
    for (const auto& c : set.categories) counts[c.id] = 0;
    for (const auto& a : set.annotations) ++counts[a.category_id];
    return counts;
}

StatsReport compute_stats(const AnnotationSet& set,
                          const std::map<int, Raster>& rasters_by_image_id,
                          const std::set<int>& face_category_ids) {
    StatsReport report;
    report.n_images = static_cast<long long>(set.images.size());
    report.n_instances = static_cast<long long>(set.annotations.size());
    report.class_counts = per_class_counts(set);
    report.face_category_ids = face_category_ids;

    std::vector<long long> counts;
    for (const auto& [id, c] : report.class_counts) counts.push_back(c);
    if (!counts.empty() && report.n_instances > 0) {
        report.cv = class_cv(counts);
        report.top20 = top_fraction_concentration(counts, 0.2);
    }

    report.resolution = resolution_table(set);

    std::map<int, const AnnImage*> image_by_id;
    for (const auto& i : set.images) image_by_id[i.id] = &i;
    std::map<int, std::vector<const AnnObject*>> by_image;
    for (const auto& a : set.annotations) {
        by_image[a.image_id].push_back(&a);
        report.sizes.push_back({a.id, a.image_id, a.category_id,
                                normalized_object_size(a, *image_by_id.at(a.image_id))});
        const auto raster = rasters_by_image_id.find(a.image_id);
        if (raster != rasters_by_image_id.end()) {
            const auto c = relative_contrast(raster->second, a);
            if (c.has_value()) report.contrast.push_back({a.id, a.image_id, *c});
        }
    }
    for (const auto& [img, boxes] : by_image) {
        const auto d = size_disparity(boxes);
        if (d.has_value()) report.disparity.push_back({img, *d});
    }
    report.scale_spread = class_scale_spread(set);
    report.face_density = face_density_histogram(set, face_category_ids);
    return report;
}

void write_stats_outputs(const StatsReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::trunc);
        if (!out) throw IoError(std::string("stats: cannot write ") + name);
        return out;
    };

    {
        auto out = open("class_counts.csv");
        out << "category_id,count\n";
        for (const auto& [id, c] : report.class_counts) out << id << "," << c << "\n";
    }
    {
        auto out = open("resolution.csv");
        out << "image_id,width,height,aspect\n";
        for (const auto& r : report.resolution) {
            out << r.image_id << "," << r.width << "," << r.height << ","
                << num(r.aspect) << "\n";
        }
    }
    {
        auto out = open("object_sizes.csv");
        out << "annotation_id,image_id,category_id,size_ratio\n";
        for (const auto& s : report.sizes) {
            out << s.annotation_id << "," << s.image_id << "," << s.category_id << ","
                << num(s.ratio) << "\n";
        }
    }
    {
        auto out = open("contrast.csv");
        out << "annotation_id,image_id,contrast\n";
        for (const auto& c : report.contrast) {
            out << c.annotation_id << "," << c.image_id << "," << num(c.contrast) << "\n";
        }
    }
    {
        auto out = open("disparity.csv");
        out << "image_id,disparity\n";
        for (const auto& d : report.disparity) {
            out << d.image_id << "," << num(d.value) << "\n";
        }
    }
    {
        auto out = open("scale_spread.csv");
        out << "category_id,count,min,q25,median,q75,max\n";
        for (const auto& s : report.scale_spread) {
            out << s.category_id << "," << s.count << "," << num(s.min) << ","
                << num(s.q25) << "," << num(s.median) << "," << num(s.q75) << ","
                << num(s.max) << "\n";
        }
    }
    {
        auto out = open("face_density.csv");
        out << "bucket,image_count,instance_count\n";
        for (int b = 0; b < FaceDensityHistogram::kBuckets; ++b) {
            if (report.face_density.image_count[b] == 0) continue;
            const std::string label = b == 31 ? "32+" : std::to_string(b + 1);
            out << label << "," << report.face_density.image_count[b] << ","
                << report.face_density.instance_count[b] << "\n";
        }
    }
    {
        nlohmann::json summary;
        summary["cv"] = report.cv;
        summary["top20"] = report.top20;
        summary["n_images"] = report.n_images;
        summary["n_instances"] = report.n_instances;
        nlohmann::json per_class = nlohmann::json::object();
        for (const auto& [id, c] : report.class_counts) {
            per_class[std::to_string(id)] = c;
        }
        summary["per_class_counts"] = per_class;
        auto out = open("summary.json");
        out << summary.dump(2) << "\n";
    }
}

}  // namespace freqpriv
