#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "nucdet/data.hpp"
#include "nucdet/image_io.hpp"
#include "nucdet/synthetic.hpp"

using namespace nucdet;
namespace fs = std::filesystem;

TEST_CASE("synth_labels places peak-normalized Gaussians") {
    SUBCASE("no centers gives an all-zero map") {
        const Grid2D y = synth_labels({}, 20, 20);
        for (size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] == 0.0);
    }
    SUBCASE("single center peaks at exactly 1") {
        const Grid2D y = synth_labels({{10, 10}}, 21, 21);
        CHECK(y(10, 10) == doctest::Approx(1.0));
        CHECK(y(11, 10) == doctest::Approx(std::exp(-1.0 / 8.0)).epsilon(1e-12));
        for (size_t i = 0; i < y.size(); ++i) {
            CHECK(y[i] >= 0.0);
            CHECK(y[i] <= 1.0);
        }
    }
    SUBCASE("nearby centers combine by max and stay within [0,1]") {
        const Grid2D y = synth_labels({{10, 10}, {10, 13}}, 21, 21);
        CHECK(y(10, 10) == doctest::Approx(1.0));
        CHECK(y(10, 13) == doctest::Approx(1.0));
        // midpoint-ish cell: max of the two kernel values, not their sum
        const double left = std::exp(-(1.0 * 1.0) / 8.0);   // 1 px from (10,10)... offset (0,1) -> dist 1? midpoint col 11/12
        const double from_a = std::exp(-(2.0 * 2.0) / 8.0); // (10,12) is 2 from col 10
        const double from_b = std::exp(-(1.0 * 1.0) / 8.0); // and 1 from col 13
        (void)left;
        CHECK(y(10, 12) == doctest::Approx(std::max(from_a, from_b)).epsilon(1e-12));
        for (size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] <= 1.0);
    }
    SUBCASE("out-of-bounds center is rejected with its coordinate") {
        CHECK_THROWS_WITH_AS(synth_labels({{25, 3}}, 20, 20, {}),
                             doctest::Contains("25,3"), std::invalid_argument);
    }
}

TEST_CASE("extract_patches tiles the grid") {
    const Grid2D x(100, 100, 0.5), e(100, 100, 0.0), y(100, 100, 0.0);
    SUBCASE("exact fit gives one tuple") {
        const Grid2D s(40, 40, 0.1);
        CHECK(extract_patches(s, s, s, 40, 40).size() == 1);
    }
    SUBCASE("80x80 stride 40 tiles into 4") {
        const Grid2D s(80, 80, 0.1);
        CHECK(extract_patches(s, s, s, 40, 40).size() == 4);
    }
    SUBCASE("100x100 stride 20 gives 16 tuples") {
        CHECK(extract_patches(x, e, y, 40, 20).size() == 16);
    }
    SUBCASE("image smaller than patch is rejected") {
        const Grid2D s(30, 50, 0.0);
        CHECK_THROWS_AS(extract_patches(s, s, s, 40, 20), std::invalid_argument);
    }
    SUBCASE("patches stay aligned across the triple") {
        Grid2D gx(60, 60), ge(60, 60), gy(60, 60);
        for (int r = 0; r < 60; ++r)
            for (int c = 0; c < 60; ++c) {
                gx(r, c) = r * 100 + c;
                ge(r, c) = r * 100 + c + 0.25;
                gy(r, c) = r * 100 + c + 0.5;
            }
        const auto tuples = extract_patches(gx, ge, gy, 40, 20);
        REQUIRE(tuples.size() == 4);
        for (const TrainingTuple& t : tuples)
            for (int r = 0; r < 40; ++r)
                for (int c = 0; c < 40; ++c) {
                    CHECK(t.x_edge(r, c) == doctest::Approx(t.x(r, c) + 0.25));
                    CHECK(t.y(r, c) == doctest::Approx(t.x(r, c) + 0.5));
                }
    }
}

TEST_CASE("filter_void drops empty tuples in order") {
    std::vector<TrainingTuple> tuples;
    for (int i = 0; i < 10; ++i) {
        TrainingTuple t{Grid2D(8, 8, 0.1), Grid2D(8, 8, 0.0), Grid2D(8, 8, 0.0)};
        t.x(0, 0) = i;  // tag for order checking
        if (i % 3 != 0)
            t.y(4, 4) = 1.0;  // annotated center inside
        tuples.push_back(std::move(t));
    }
    const auto kept = filter_void(tuples);
    REQUIRE(kept.size() == 6);  // i = 0,3,6,9 dropped
    double last_tag = -1.0;
    for (const TrainingTuple& t : kept) {
        CHECK(t.x(0, 0) > last_tag);
        last_tag = t.x(0, 0);
        double peak = 0.0;
        for (size_t i = 0; i < t.y.size(); ++i)
            peak = std::max(peak, t.y[i]);
        CHECK(peak >= 0.5);
    }
}

TEST_CASE("center CSV round trip and validation") {
    const fs::path path = "centers_tmp.csv";
    const std::vector<Pixel> centers = {{3, 4}, {10, 2}, {0, 0}};
    write_centers(path, centers);
    const auto loaded = read_centers(path);
    REQUIRE(loaded.size() == centers.size());
    for (size_t i = 0; i < centers.size(); ++i)
        CHECK(loaded[i] == centers[i]);

    std::ofstream dup(path);
    dup << "row,col\n5,5\n5,5\n";
    dup.close();
    CHECK_THROWS(read_centers(path));
    fs::remove(path);
}

TEST_CASE("load_dataset splits deterministically and reports missing annotations") {
    const fs::path root = "dataset_tmp";
    fs::remove_all(root);

    SyntheticConfig cfg;
    cfg.images = 6;
    cfg.size = 64;
    cfg.train_count = 4;
    cfg.min_nuclei = 2;
    cfg.max_nuclei = 4;
    cfg.seed = 3;
    write_synthetic_dataset(root, cfg);

    const SplitSpec split{4, 2};
    const Dataset a = load_dataset(root / "images", root / "annotations", CannyConfig{},
                                   split, 11, LabelConfig{}, 40, 24);
    const Dataset b = load_dataset(root / "images", root / "annotations", CannyConfig{},
                                   split, 11, LabelConfig{}, 40, 24);
    CHECK(a.train.size() == b.train.size());
    CHECK(a.test.size() == 2);
    CHECK(a.train_names.size() == 4);
    for (size_t i = 0; i < a.test.size(); ++i)
        CHECK(a.test[i].name == b.test[i].name);

    // disjoint and exhaustive partitions
    std::set<std::string> names(a.train_names.begin(), a.train_names.end());
    for (const TestImage& t : a.test) {
        CHECK(names.count(t.name) == 0);
        names.insert(t.name);
    }
    CHECK(names.size() == 6);

    // a different seed reshuffles the partition
    const Dataset c = load_dataset(root / "images", root / "annotations", CannyConfig{},
                                   split, 12, LabelConfig{}, 40, 24);
    bool same = a.train_names == c.train_names;
    for (size_t i = 0; i < a.test.size() && same; ++i)
        same = a.test[i].name == c.test[i].name;
    CHECK_FALSE(same);

    SUBCASE("wrong split size is rejected") {
        CHECK_THROWS(load_dataset(root / "images", root / "annotations", CannyConfig{},
                                  SplitSpec{5, 2}, 1, LabelConfig{}, 40, 24));
    }
    SUBCASE("missing annotation names the image") {
        fs::remove(root / "annotations" / "img_002.csv");
        CHECK_THROWS_WITH_AS(load_dataset(root / "images", root / "annotations",
                                          CannyConfig{}, split, 1, LabelConfig{}, 40, 24),
                             doctest::Contains("img_002"), std::runtime_error);
    }
    SUBCASE("empty directory is rejected") {
        fs::create_directories(root / "empty");
        CHECK_THROWS(load_dataset(root / "empty", root / "annotations", CannyConfig{},
                                  split, 1, LabelConfig{}, 40, 24));
    }
    fs::remove_all(root);
}

TEST_CASE("load_test_partition matches the dataset split") {
    const fs::path root = "dataset_tmp2";
    fs::remove_all(root);

    SyntheticConfig cfg;
    cfg.images = 5;
    cfg.size = 64;
    cfg.train_count = 3;
    cfg.min_nuclei = 2;
    cfg.max_nuclei = 3;
    cfg.seed = 9;
    write_synthetic_dataset(root, cfg);

    const SplitSpec split{3, 2};
    const Dataset full = load_dataset(root / "images", root / "annotations", CannyConfig{},
                                      split, 5, LabelConfig{}, 40, 24);
    const auto test_only =
        load_test_partition(root / "images", root / "annotations", split, 5);
    REQUIRE(test_only.size() == full.test.size());
    for (size_t i = 0; i < test_only.size(); ++i) {
        CHECK(test_only[i].name == full.test[i].name);
        CHECK(test_only[i].centers.size() == full.test[i].centers.size());
    }
    fs::remove_all(root);
}

TEST_CASE("image io round trip and luminance conversion") {
    const fs::path pgm = "io_tmp.pgm";
    Grid2D g(5, 7);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<double>(i) / g.size();
    write_image_pgm(pgm, g);
    const Grid2D back = read_image(pgm);
    REQUIRE(back.height() == 5);
    REQUIRE(back.width() == 7);
    for (size_t i = 0; i < g.size(); ++i)
        CHECK(back[i] == doctest::Approx(g[i]).epsilon(3e-3));  // 8-bit quantization
    fs::remove(pgm);

    const fs::path ppm = "io_tmp.ppm";
    std::ofstream out(ppm, std::ios::binary);
    out << "P6\n2 1\n255\n";
    const unsigned char px[6] = {255, 0, 0, 0, 255, 0};  // red, green
    out.write(reinterpret_cast<const char*>(px), 6);
    out.close();
    const Grid2D lum = read_image(ppm);
    CHECK(lum(0, 0) == doctest::Approx(0.299).epsilon(1e-6));
    CHECK(lum(0, 1) == doctest::Approx(0.587).epsilon(1e-6));
    fs::remove(ppm);

    CHECK_THROWS(read_image("does_not_exist.pgm"));
}
