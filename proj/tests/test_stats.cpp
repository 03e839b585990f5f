#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "freqpriv/rng.hpp"
#include "freqpriv/stats.hpp"

using namespace freqpriv;

namespace {

std::string fixture_dir() {
    return std::string(FREQPRIV_SOURCE_DIR) + "/fixtures/stats_fixture";
}

AnnotationSet load_fixture() {
    return load_annotations(fixture_dir() + "/annotations.json");
}

std::map<int, Raster> load_fixture_rasters(const AnnotationSet& set) {
    std::map<int, Raster> rasters;
    for (const auto& img : set.images) {
        rasters[img.id] = read_pgm(fixture_dir() + "/images/" + img.file_name);
    }
    return rasters;
}

}  // namespace

TEST_CASE("class_cv examples") {
    CHECK(class_cv({10, 10, 10, 10}) == 0.0);
    CHECK(class_cv({80, 5, 5, 5, 5}) == doctest::Approx(1.5).epsilon(1e-12));
    // scale invariance
    CHECK(class_cv({80 * 7, 5 * 7, 5 * 7, 5 * 7, 5 * 7}) ==
          doctest::Approx(class_cv({80, 5, 5, 5, 5})).epsilon(1e-12));
    CHECK_THROWS_AS(class_cv({}), ValidationError);
    CHECK_THROWS_AS(class_cv({0, 0, 0}), NumericError);
}

TEST_CASE("top_fraction_concentration examples") {
    CHECK(top_fraction_concentration({7, 7, 7, 7, 7, 7, 7, 7, 7, 7}, 0.2) ==
          doctest::Approx(0.2).epsilon(1e-12));
    CHECK(top_fraction_concentration({80, 5, 5, 5, 5}, 0.2) ==
          doctest::Approx(0.80).epsilon(1e-12));
    CHECK(top_fraction_concentration({42}, 0.2) == 1.0);
    // nondecreasing in the fraction, exactly 1.0 at fraction 1.0
    const std::vector<long long> counts{30, 10, 5, 3, 2};
    double prev = 0.0;
    for (double f : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double v = top_fraction_concentration(counts, f);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(top_fraction_concentration(counts, 1.0) == 1.0);
    CHECK_THROWS_AS(top_fraction_concentration({}, 0.2), ValidationError);
    CHECK_THROWS_AS(top_fraction_concentration({1, 2}, 0.0), ValidationError);
}

TEST_CASE("normalized_object_size examples") {
    AnnImage img{1, "x.pgm", 1000, 1000};
    AnnObject ann{1, 1, 1, {0, 0, 100, 100}};
    CHECK(normalized_object_size(ann, img) == doctest::Approx(0.01).epsilon(1e-15));
    AnnObject full{2, 1, 1, {0, 0, 1000, 1000}};
    CHECK(normalized_object_size(full, img) == 1.0);
}

TEST_CASE("relative_contrast: full-image box is exactly 1") {
    Rng rng_seeded(101);
    Raster img(8, 8);
    bool varied = false;
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng_seeded.uniform_int(0, 255));
    for (auto& p : img.pixels) varied = varied || p != img.pixels[0];
    REQUIRE(varied);
    AnnObject ann{1, 1, 1, {0, 0, 8, 8}};
    CHECK(relative_contrast(img, ann).value() == 1.0);
}

TEST_CASE("relative_contrast: constant region scores 0, constant image errors") {
    Raster img(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) img.at(y, x) = x < 2 ? 0 : 8;
    }
    AnnObject left{1, 1, 1, {0, 0, 2, 4}};
    CHECK(relative_contrast(img, left).value() == 0.0);

    Raster flat(4, 4);
    AnnObject any{1, 1, 1, {0, 0, 2, 2}};
    CHECK_THROWS_AS(relative_contrast(flat, any), NumericError);
}

TEST_CASE("relative_contrast matches a naive double-loop oracle on random 8x8") {
    Rng rng(102);
    Raster img(8, 8);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    AnnObject ann{1, 1, 1, {1.5, 2.25, 4.0, 3.5}};  // clamps to x [1,6), y [2,6)

    auto var_of = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.size();
        double acc = 0.0;
        for (double x : v) acc += (x - m) * (x - m);
        return acc / v.size();
    };
    std::vector<double> all, box;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            all.push_back(img.at(y, x));
            if (x >= 1 && x < 6 && y >= 2 && y < 6) box.push_back(img.at(y, x));
        }
    }
    CHECK(relative_contrast(img, ann).value() ==
          doctest::Approx(var_of(box) / var_of(all)).epsilon(1e-12));
}

TEST_CASE("size_disparity examples") {
    AnnObject a{1, 1, 1, {0, 0, 2, 2}};
    AnnObject b{2, 1, 1, {4, 4, 2, 2}};
    CHECK(size_disparity({&a, &b}).value() == 0.0);

    AnnObject unit{3, 1, 1, {0, 0, 1, 1}};
    AnnObject e2{4, 1, 1, {0, 0, std::exp(1.0), std::exp(1.0)}};  // area e^2
    CHECK(size_disparity({&unit, &e2}).value() == doctest::Approx(2.0).epsilon(1e-12));

    CHECK(!size_disparity({&a}).has_value());
    CHECK(size_disparity({&a, &b}).value() >= 0.0);
}

TEST_CASE("class_scale_spread quantiles") {
    AnnotationSet set;
    set.images.push_back({1, "a.pgm", 10, 10});
    set.categories.push_back({0, "only"});
    // single object of ratio 0.3 -> all quantiles 0.3
    set.annotations.push_back({1, 1, 0, {0, 0, 5, 6}});  // 30/100
    auto spread = class_scale_spread(set);
    REQUIRE(spread.size() == 1);
    CHECK(spread[0].min == doctest::Approx(0.3));
    CHECK(spread[0].q25 == doctest::Approx(0.3));
    CHECK(spread[0].median == doctest::Approx(0.3));
    CHECK(spread[0].q75 == doctest::Approx(0.3));
    CHECK(spread[0].max == doctest::Approx(0.3));

    // two objects 0.1 / 0.3 -> linear-interpolation median 0.2
    set.annotations.push_back({2, 1, 0, {0, 0, 2, 5}});  // 10/100
    spread = class_scale_spread(set);
    CHECK(spread[0].min == doctest::Approx(0.1));
    CHECK(spread[0].median == doctest::Approx(0.2));
    CHECK(spread[0].max == doctest::Approx(0.3));

    // random set vs a sort-based oracle for the median
    Rng rng(103);
    AnnotationSet rnd;
    rnd.images.push_back({1, "a.pgm", 100, 100});
    rnd.categories.push_back({0, "c"});
    std::vector<double> ratios;
    for (int i = 0; i < 17; ++i) {
        const double w = rng.uniform(1.0, 50.0);
        const double h = rng.uniform(1.0, 50.0);
        rnd.annotations.push_back({i + 1, 1, 0, {0, 0, w, h}});
        ratios.push_back(w * h / 10000.0);
    }
    std::sort(ratios.begin(), ratios.end());
    const auto rs = class_scale_spread(rnd);
    CHECK(rs[0].median == doctest::Approx(ratios[8]).epsilon(1e-12));
    CHECK(rs[0].min == doctest::Approx(ratios.front()));
    CHECK(rs[0].max == doctest::Approx(ratios.back()));
}

TEST_CASE("face_density_histogram buckets") {
    AnnotationSet set;
    set.categories.push_back({2, "face"});
    set.categories.push_back({1, "text"});
    set.images.push_back({1, "a.pgm", 10, 10});
    set.images.push_back({2, "b.pgm", 10, 10});
    set.images.push_back({3, "c.pgm", 10, 10});
    int next = 1;
    for (int i = 0; i < 3; ++i) set.annotations.push_back({next++, 1, 2, {0, 0, 1, 1}});
    for (int i = 0; i < 40; ++i) set.annotations.push_back({next++, 2, 2, {0, 0, 1, 1}});
    set.annotations.push_back({next++, 3, 1, {0, 0, 1, 1}});  // text only: excluded

    const auto h = face_density_histogram(set, {2});
    CHECK(h.image_count[2] == 1);     // bucket "3"
    CHECK(h.instance_count[2] == 3);
    CHECK(h.image_count[31] == 1);    // bucket "32+"
    CHECK(h.instance_count[31] == 40);
    long long images_total = 0;
    for (long long v : h.image_count) images_total += v;
    CHECK(images_total == 2);

    // brute-force oracle on a random set
    Rng rng(104);
    AnnotationSet rnd;
    rnd.categories.push_back({0, "face"});
    std::map<int, int> expected;
    int ann_id = 1;
    for (int img = 1; img <= 12; ++img) {
        rnd.images.push_back({img, "x.pgm", 10, 10});
        const int n = rng.uniform_int(0, 6);
        expected[img] = n;
        for (int i = 0; i < n; ++i) rnd.annotations.push_back({ann_id++, img, 0, {0, 0, 1, 1}});
    }
    const auto rh = face_density_histogram(rnd, {0});
    std::array<long long, 32> img_count{}, inst_count{};
    for (const auto& [img, n] : expected) {
        if (n == 0) continue;
        const int bucket = n >= 32 ? 31 : n - 1;
        img_count[bucket] += 1;
        inst_count[bucket] += n;
    }
    for (int b = 0; b < 32; ++b) {
        CHECK(rh.image_count[b] == img_count[b]);
        CHECK(rh.instance_count[b] == inst_count[b]);
    }
}

TEST_CASE("resolution_table rows") {
    AnnotationSet set;
    set.images.push_back({1, "a.pgm", 1920, 1080});
    set.images.push_back({2, "b.pgm", 512, 512});
    const auto rows = resolution_table(set);
    REQUIRE(rows.size() == set.images.size());
    CHECK(rows[0].aspect == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(rows[1].aspect == 1.0);
}

TEST_CASE("load_annotations: empty valid file, integrity errors, round trip") {
    const AnnotationSet empty =
        parse_annotations(R"({"images":[],"annotations":[],"categories":[]})");
    CHECK(empty.images.empty());
    CHECK(empty.annotations.empty());

    CHECK_THROWS_WITH_AS(
        parse_annotations(
            R"({"images":[{"id":1,"file_name":"a","width":4,"height":4}],
                "annotations":[{"id":9,"image_id":77,"category_id":1,"bbox":[0,0,1,1]}],
                "categories":[{"id":1,"name":"c"}]})"),
        doctest::Contains("77"), ValidationError);

    CHECK_THROWS_AS(parse_annotations("{not json"), ValidationError);

    const AnnotationSet fixture = load_fixture();
    const AnnotationSet reloaded = parse_annotations(annotations_to_json(fixture));
    CHECK(annotations_to_json(reloaded) == annotations_to_json(fixture));
}

TEST_CASE("validator flags out-of-bounds boxes without dropping them") {
    const AnnotationSet set = parse_annotations(
        R"({"images":[{"id":1,"file_name":"a","width":4,"height":4}],
            "annotations":[
              {"id":1,"image_id":1,"category_id":1,"bbox":[0,0,10,10]},
              {"id":2,"image_id":1,"category_id":1,"bbox":[0,0,2,0]}],
            "categories":[{"id":1,"name":"c"}]})");
    CHECK(set.annotations.size() == 2);
    CHECK(set.violations.size() == 2);
}

TEST_CASE("fixture: every statistic equals its hand-computed value") {
    const AnnotationSet set = load_fixture();
    const auto rasters = load_fixture_rasters(set);
    const StatsReport report = compute_stats(set, rasters, {2});

    CHECK(report.n_images == 3);
    CHECK(report.n_instances == 8);

    // class counts {1:4, 2:2, 3:1, 4:1}
    CHECK(report.class_counts.at(1) == 4);
    CHECK(report.class_counts.at(2) == 2);
    CHECK(report.class_counts.at(3) == 1);
    CHECK(report.class_counts.at(4) == 1);

    // counts {4,2,1,1}: mean 2, population var 1.5
    CHECK(report.cv == std::sqrt(1.5) / 2.0);
    // ceil(0.2*4)=1 top class holds 4 of 8
    CHECK(report.top20 == 0.5);

    // sizes by annotation id
    std::map<int, double> size_by_id;
    for (const auto& s : report.sizes) size_by_id[s.annotation_id] = s.ratio;
    CHECK(size_by_id.at(1) == 1.0);
    CHECK(size_by_id.at(2) == 0.25);
    CHECK(size_by_id.at(3) == 0.5);
    CHECK(size_by_id.at(4) == 0.25);
    CHECK(size_by_id.at(5) == 0.5);
    CHECK(size_by_id.at(6) == 0.125);
    CHECK(size_by_id.at(7) == 0.25);
    CHECK(size_by_id.at(8) == 0.25);

    // contrast by annotation id (population variances of integer rasters)
    std::map<int, double> contrast_by_id;
    for (const auto& c : report.contrast) contrast_by_id[c.annotation_id] = c.contrast;
    CHECK(contrast_by_id.at(1) == 1.0);
    CHECK(contrast_by_id.at(2) == 1.0);
    CHECK(contrast_by_id.at(3) == 0.0);
    CHECK(contrast_by_id.at(4) == 1.0);
    CHECK(contrast_by_id.at(5) == 0.0);
    CHECK(contrast_by_id.at(6) == 1.0);
    CHECK(contrast_by_id.at(7) == 1.0 / 2.5);
    CHECK(contrast_by_id.at(8) == 0.0);

    // disparity: image 1 ln(16/4), image 2 ln(16/4), image 3 absent (one box)
    REQUIRE(report.disparity.size() == 2);
    CHECK(report.disparity[0].image_id == 1);
    CHECK(report.disparity[0].value == std::log(4.0));
    CHECK(report.disparity[1].image_id == 2);
    CHECK(report.disparity[1].value == std::log(4.0));

    // face histogram: image 2 has two cat-2 instances
    CHECK(report.face_density.image_count[1] == 1);
    CHECK(report.face_density.instance_count[1] == 2);

    // class 1 spread over {1.0, 0.25, 0.5, 0.125}
    const auto& spread = report.scale_spread;
    REQUIRE(spread.size() == 4);
    CHECK(spread[0].category_id == 1);
    CHECK(spread[0].min == 0.125);
    CHECK(spread[0].q25 == 0.21875);
    CHECK(spread[0].median == 0.375);
    CHECK(spread[0].q75 == 0.625);
    CHECK(spread[0].max == 1.0);

    // resolution rows
    REQUIRE(report.resolution.size() == 3);
    CHECK(report.resolution[0].aspect == 1.0);
    CHECK(report.resolution[1].aspect == 0.5);
    CHECK(report.resolution[2].aspect == 1.0);
}

TEST_CASE("write_stats_outputs produces every CSV family") {
    namespace fs = std::filesystem;
    const AnnotationSet set = load_fixture();
    const StatsReport report = compute_stats(set, load_fixture_rasters(set), {2});
    const fs::path dir = fs::temp_directory_path() / "freqpriv_stats_test";
    write_stats_outputs(report, dir.string());
    for (const char* name :
         {"class_counts.csv", "resolution.csv", "object_sizes.csv", "contrast.csv",
          "disparity.csv", "scale_spread.csv", "face_density.csv", "summary.json"}) {
        CHECK(fs::exists(dir / name));
    }
}
