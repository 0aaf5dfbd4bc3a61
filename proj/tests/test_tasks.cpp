#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "morphcl/tasks.hpp"

using namespace morphcl;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("morphcl_test_" + name);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

// Independent fixture writer for round-trip checks.
void write_idx_fixture(const fs::path& img_path, const fs::path& lbl_path,
                       const std::vector<std::vector<unsigned char>>& images,
                       const std::vector<unsigned char>& labels) {
    std::ofstream img(img_path, std::ios::binary);
    write_be32(img, 0x00000803u);
    write_be32(img, static_cast<std::uint32_t>(images.size()));
    write_be32(img, 28);
    write_be32(img, 28);
    for (const auto& im : images)
        img.write(reinterpret_cast<const char*>(im.data()), static_cast<std::streamsize>(im.size()));
    std::ofstream lbl(lbl_path, std::ios::binary);
    write_be32(lbl, 0x00000801u);
    write_be32(lbl, static_cast<std::uint32_t>(labels.size()));
    lbl.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

double pixel_sum(const Matrix& images) {
    double s = 0.0;
    for (double v : images.data()) s += v;
    return s;
}

}  // namespace

TEST_CASE("sine task generation", "[tasks]") {
    SECTION("clean unit sine reproduces sin(x) exactly") {
        SineTaskSpec spec;
        spec.amplitude = 1.0;
        spec.frequency = 1.0;
        spec.phase = 0.0;
        spec.noise = 0.0;
        spec.n_samples = 200;
        const Dataset ds = gen_sine_task(spec, 4);
        for (std::size_t i = 0; i < ds.size(); ++i)
            REQUIRE(ds.y(i, 0) == std::sin(ds.x(i, 0)));
    }
    SECTION("amplitude bounds the clean signal") {
        SineTaskSpec spec;
        spec.amplitude = 2.0;
        spec.n_samples = 500;
        const Dataset ds = gen_sine_task(spec, 5);
        for (std::size_t i = 0; i < ds.size(); ++i) REQUIRE(std::fabs(ds.y(i, 0)) <= 2.0);
    }
    SECTION("default domain is [-90, 90]") {
        SineTaskSpec spec;
        spec.n_samples = 2000;
        const Dataset ds = gen_sine_task(spec, 6);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            REQUIRE(ds.x(i, 0) >= -90.0);
            REQUIRE(ds.x(i, 0) < 90.0);
        }
    }
    SECTION("generation is a pure function of (spec, seed)") {
        SineTaskSpec spec;
        spec.noise = 0.1;
        const Dataset a = gen_sine_task(spec, 42);
        const Dataset b = gen_sine_task(spec, 42);
        REQUIRE(a.x == b.x);
        REQUIRE(a.y == b.y);
    }
}

TEST_CASE("noise schedule ramps linearly", "[tasks]") {
    CHECK(noise_schedule(0, 0.02) == 0.0);
    CHECK(noise_schedule(5, 0.02) == Catch::Approx(0.1).margin(1e-15));
    double prev = -1.0;
    for (int t = 0; t < 10; ++t) {
        const double s = noise_schedule(t, 0.03);
        REQUIRE(s >= prev);
        prev = s;
    }
}

TEST_CASE("idx files round-trip", "[tasks]") {
    const auto img_path = temp_file("imgs.idx");
    const auto lbl_path = temp_file("lbls.idx");
    SECTION("two-image fixture reads back exactly") {
        std::vector<std::vector<unsigned char>> images(2, std::vector<unsigned char>(784, 0));
        images[0][0] = 255;
        images[0][783] = 128;
        images[1][100] = 1;
        write_idx_fixture(img_path, lbl_path, images, {3, 7});
        const auto [mat, labels] = load_idx(img_path.string(), lbl_path.string());
        REQUIRE(mat.rows() == 2);
        REQUIRE(mat.cols() == 784);
        CHECK(mat(0, 0) == 1.0);  // 255 scales to 1.0
        CHECK(mat(0, 783) == Catch::Approx(128.0 / 255.0));
        CHECK(mat(1, 100) == Catch::Approx(1.0 / 255.0));
        CHECK(labels == std::vector<int>{3, 7});
    }
    SECTION("zero-image file is valid and empty") {
        write_idx_fixture(img_path, lbl_path, {}, {});
        const auto [mat, labels] = load_idx(img_path.string(), lbl_path.string());
        CHECK(mat.rows() == 0);
        CHECK(labels.empty());
    }
    SECTION("bad magic, truncation, and count mismatch are rejected") {
        {
            std::ofstream bad(img_path, std::ios::binary);
            write_be32(bad, 0xdeadbeef);
        }
        CHECK_THROWS_WITH(load_idx_images(img_path.string()),
                          Catch::Matchers::ContainsSubstring("magic"));
        {
            std::ofstream trunc(img_path, std::ios::binary);
            write_be32(trunc, 0x00000803u);
            write_be32(trunc, 1);
            write_be32(trunc, 28);
            write_be32(trunc, 28);
            const char few[10] = {};
            trunc.write(few, sizeof(few));
        }
        CHECK_THROWS_WITH(load_idx_images(img_path.string()),
                          Catch::Matchers::ContainsSubstring("truncated"));
        std::vector<std::vector<unsigned char>> images(2, std::vector<unsigned char>(784, 0));
        write_idx_fixture(img_path, lbl_path, images, {1});
        CHECK_THROWS_WITH(load_idx(img_path.string(), lbl_path.string()),
                          Catch::Matchers::ContainsSubstring("mismatch"));
    }
    fs::remove(img_path);
    fs::remove(lbl_path);
}

TEST_CASE("rotation and shear transforms", "[tasks]") {
    const Dataset digits = synthetic_digits(3, 11);
    SECTION("theta = 0 is the identity") {
        const Matrix out = transform_rotate_shear(digits.x, 0.0);
        for (std::size_t i = 0; i < out.size(); ++i)
            REQUIRE(out.data()[i] == Catch::Approx(digits.x.data()[i]).margin(1e-12));
    }
    SECTION("pure 180-degree rotation is the point reflection (r,c) -> (27-r, 27-c)") {
        const Matrix out = rotate_images(digits.x, 180.0);
        for (std::size_t n = 0; n < digits.x.rows(); ++n)
            for (int r = 0; r < 28; ++r)
                for (int c = 0; c < 28; ++c)
                    REQUIRE(out(n, r * 28 + c) ==
                            Catch::Approx(digits.x(n, (27 - r) * 28 + (27 - c))).margin(1e-9));
    }
    SECTION("total mass never increases under resampling with zero padding") {
        for (double theta : {15.0, 47.0, 90.0, 133.0, 180.0}) {
            const Matrix out = transform_rotate_shear(digits.x, theta);
            REQUIRE(pixel_sum(out) <= pixel_sum(digits.x) + 1e-9);
        }
    }
    SECTION("out-of-range angles are rejected") {
        CHECK_THROWS_AS(transform_rotate_shear(digits.x, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(transform_rotate_shear(digits.x, 181.0), std::invalid_argument);
    }
}

TEST_CASE("train/test split", "[tasks]") {
    SineTaskSpec spec;
    spec.n_samples = 10;
    const Dataset ds = gen_sine_task(spec, 1);
    SECTION("n=10 at 0.8 gives 8/2") {
        const auto [tr, te] = split(ds, 0.8, 3);
        CHECK(tr.size() == 8);
        CHECK(te.size() == 2);
    }
    SECTION("the splits partition the original multiset") {
        const auto [tr, te] = split(ds, 0.8, 3);
        std::multiset<double> orig, got;
        for (std::size_t i = 0; i < ds.size(); ++i) orig.insert(ds.x(i, 0));
        for (std::size_t i = 0; i < tr.size(); ++i) got.insert(tr.x(i, 0));
        for (std::size_t i = 0; i < te.size(); ++i) got.insert(te.x(i, 0));
        REQUIRE(orig == got);
    }
    SECTION("same seed, same split") {
        const auto [a_tr, a_te] = split(ds, 0.8, 7);
        const auto [b_tr, b_te] = split(ds, 0.8, 7);
        REQUIRE(a_tr.x == b_tr.x);
        REQUIRE(a_te.x == b_te.x);
    }
    SECTION("fraction bounds are enforced") {
        CHECK_THROWS_AS(split(ds, 0.0, 0), std::invalid_argument);
        CHECK_THROWS_AS(split(ds, 1.0, 0), std::invalid_argument);
    }
}

TEST_CASE("task sequences", "[tasks]") {
    SECTION("five image tasks start with digits {0,1}") {
        const auto groups = digit_groups(5);
        REQUIRE(groups[0] == std::vector<int>{0, 1});
        REQUIRE(groups[4] == std::vector<int>{8, 9});
    }
    SECTION("two image tasks split 0-4 / 5-9") {
        const auto groups = digit_groups(2);
        REQUIRE(groups[0] == std::vector<int>{0, 1, 2, 3, 4});
        REQUIRE(groups[1] == std::vector<int>{5, 6, 7, 8, 9});
    }
    SECTION("image task rows carry only their group's labels") {
        const Dataset source = synthetic_digits(4, 2);
        TaskGenConfig cfg;
        cfg.image_source = &source;
        const auto tasks = make_task_sequence(TaskSequenceKind::image_digits, 5, 1, cfg);
        REQUIRE(tasks.size() == 5);
        for (std::size_t r = 0; r < tasks[0].size(); ++r) {
            int label = 0;
            for (std::size_t c = 1; c < 10; ++c)
                if (tasks[0].y(r, c) > tasks[0].y(r, label)) label = static_cast<int>(c);
            REQUIRE(label <= 1);
        }
        CHECK_THROWS_AS(make_task_sequence(TaskSequenceKind::image_digits, 11, 1, cfg),
                        std::invalid_argument);
    }
    SECTION("ten sine tasks draw distinct parameters from a shared domain") {
        TaskGenConfig cfg;
        cfg.n_samples = 50;
        const auto tasks = make_task_sequence(TaskSequenceKind::sine, 10, 3, cfg);
        REQUIRE(tasks.size() == 10);
        std::set<double> first_y;
        for (const auto& t : tasks) {
            REQUIRE(t.size() == 50);
            first_y.insert(t.y(0, 0));
        }
        REQUIRE(first_y.size() == 10);  // distinct (a, phi) draws
    }
    SECTION("sequences are identical for a fixed seed") {
        TaskGenConfig cfg;
        cfg.n_samples = 30;
        const auto a = make_task_sequence(TaskSequenceKind::sine_noisy, 4, 9, cfg);
        const auto b = make_task_sequence(TaskSequenceKind::sine_noisy, 4, 9, cfg);
        for (int t = 0; t < 4; ++t) {
            REQUIRE(a[t].x == b[t].x);
            REQUIRE(a[t].y == b[t].y);
        }
    }
}
