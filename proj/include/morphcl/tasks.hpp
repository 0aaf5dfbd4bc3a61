#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "morphcl/dataset.hpp"
#include "morphcl/rng.hpp"

namespace morphcl {

struct SineTaskSpec {
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;
    double noise = 0.0;
    std::size_t n_samples = 1000;
    double lo = -90.0;
    double hi = 90.0;

    void validate() const {
        detail::require(n_samples >= 1, "sine task: n_samples must be >= 1");
        detail::require(noise >= 0.0, "sine task: noise must be >= 0");
        detail::require(lo < hi, "sine task: domain lo must be < hi");
    }
};

// y = a*sin(b*x + phi) + N(0, sigma^2), x uniform on [lo, hi).
inline Dataset gen_sine_task(const SineTaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, {0x73696e65ULL}));
    Dataset ds;
    ds.x = Matrix(spec.n_samples, 1);
    ds.y = Matrix(spec.n_samples, 1);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const double x = rng.uniform(spec.lo, spec.hi);
        double y = spec.amplitude * std::sin(spec.frequency * x + spec.phase);
        if (spec.noise > 0.0) y += rng.normal(0.0, spec.noise);
        ds.x(i, 0) = x;
        ds.y(i, 0) = y;
    }
    return ds;
}

// Linear noise ramp; task 0 is clean.
inline double noise_schedule(int t, double base) {
    detail::require(t >= 0, "noise_schedule: t must be >= 0");
    return base * static_cast<double>(t);
}

// ---------------------------------------------------------------------------
// IDX image/label files (big-endian, magic 2051 for images, 2049 for labels)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated file while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

// Pixels scaled to [0,1], each image flattened row-major to one matrix row.
inline Matrix load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    const auto magic = detail::read_be32(in, "magic");
    if (magic != 0x00000803u)
        throw std::runtime_error("idx: bad image magic in " + path);
    const auto n = detail::read_be32(in, "count");
    const auto rows = detail::read_be32(in, "rows");
    const auto cols = detail::read_be32(in, "cols");
    Matrix out(n, static_cast<std::size_t>(rows) * cols);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw std::runtime_error("idx: truncated image data in " + path);
        for (std::size_t p = 0; p < buf.size(); ++p)
            out(i, p) = static_cast<double>(buf[p]) / 255.0;
    }
    return out;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    const auto magic = detail::read_be32(in, "magic");
    if (magic != 0x00000801u)
        throw std::runtime_error("idx: bad label magic in " + path);
    const auto n = detail::read_be32(in, "count");
    std::vector<int> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        char c;
        in.read(&c, 1);
        if (!in) throw std::runtime_error("idx: truncated label data in " + path);
        labels[i] = static_cast<unsigned char>(c);
    }
    return labels;
}

inline std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                                    const std::string& labels_path) {
    Matrix images = load_idx_images(images_path);
    std::vector<int> labels = load_idx_labels(labels_path);
    if (images.rows() != labels.size())
        throw std::runtime_error("idx: image/label count mismatch (" +
                                 std::to_string(images.rows()) + " vs " +
                                 std::to_string(labels.size()) + ")");
    return {std::move(images), std::move(labels)};
}

inline Matrix one_hot(const std::vector<int>& labels, int n_classes) {
    Matrix out(labels.size(), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        detail::require(labels[i] >= 0 && labels[i] < n_classes, "one_hot: label out of range");
        out(i, labels[i]) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image transforms (28x28, bilinear resampling, zero padding)
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kImgSide = 28;

// Inverse-maps each output pixel through the given 2x2 matrix (about the
// image center) and samples the input bilinearly.
inline Matrix warp_images(const Matrix& images, double m00, double m01, double m10, double m11) {
    require(images.cols() == std::size_t(kImgSide * kImgSide),
            "warp: images must be flattened 28x28");
    const double c = (kImgSide - 1) / 2.0;
    const double det = m00 * m11 - m01 * m10;
    require(std::fabs(det) > 1e-12, "warp: singular transform");
    const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
    Matrix out(images.rows(), images.cols());
    for (std::size_t n = 0; n < images.rows(); ++n) {
        for (int r = 0; r < kImgSide; ++r) {
            for (int col = 0; col < kImgSide; ++col) {
                const double yo = r - c, xo = col - c;
                const double xs = i00 * xo + i01 * yo + c;
                const double ys = i10 * xo + i11 * yo + c;
                const int x0 = static_cast<int>(std::floor(xs));
                const int y0 = static_cast<int>(std::floor(ys));
                const double fx = xs - x0, fy = ys - y0;
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy) {
                    for (int dx = 0; dx <= 1; ++dx) {
                        const int xi = x0 + dx, yi = y0 + dy;
                        if (xi < 0 || xi >= kImgSide || yi < 0 || yi >= kImgSide) continue;
                        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
                        acc += w * images(n, yi * kImgSide + xi);
                    }
                }
                out(n, r * kImgSide + col) = acc;
            }
        }
    }
    return out;
}

}  // namespace detail

inline Matrix rotate_images(const Matrix& images, double theta_deg) {
    const double th = theta_deg * M_PI / 180.0;
    return detail::warp_images(images, std::cos(th), -std::sin(th), std::sin(th), std::cos(th));
}

// Rotation by theta followed by a horizontal shear whose factor is
// tan(min(theta, 60 deg)), keeping the two distortions coupled while staying
// clear of the tangent blow-up.
inline Matrix transform_rotate_shear(const Matrix& images, double theta_deg) {
    detail::require(theta_deg >= 0.0 && theta_deg <= 180.0, "transform: theta must be in [0, 180]");
    const double th = theta_deg * M_PI / 180.0;
    const double shear = std::tan(std::min(theta_deg, 60.0) * M_PI / 180.0);
    // shear * rotation
    const double m00 = std::cos(th) + shear * std::sin(th);
    const double m01 = -std::sin(th) + shear * std::cos(th);
    const double m10 = std::sin(th);
    const double m11 = std::cos(th);
    return detail::warp_images(images, m00, m01, m10, m11);
}

// ---------------------------------------------------------------------------
// Splits and sequences
// ---------------------------------------------------------------------------

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
    detail::require(train_frac > 0.0 && train_frac < 1.0, "split: train_frac must be in (0,1)");
    const std::size_t n = ds.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, {0x73706c69ULL}));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
    auto n_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * train_frac));
    if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + n_train);
    std::vector<std::size_t> te(idx.begin() + n_train, idx.end());
    return {take_rows(ds, tr), take_rows(ds, te)};
}

enum class TaskSequenceKind { sine, sine_noisy, image_digits };

struct TaskGenConfig {
    // sine family
    std::size_t n_samples = 2000;
    double amp_lo = 0.75, amp_hi = 1.25;
    double phase_lo = -0.35, phase_hi = 0.35;
    double frequency = M_PI / 180.0;
    double domain_lo = -90.0, domain_hi = 90.0;
    double noise_base = 0.02;
    // image family
    bool rotate_shear = false;
    const Dataset* image_source = nullptr;  // flattened images + one-hot labels
};

// Digit ids grouped evenly into T tasks (remainder spread over the first
// groups), e.g. T=5 -> {0,1},{2,3},... and T=2 -> {0..4},{5..9}.
inline std::vector<std::vector<int>> digit_groups(int T) {
    detail::require(T >= 1 && T <= 10, "image task split supports 1..10 tasks");
    std::vector<std::vector<int>> groups(T);
    const int base = 10 / T, extra = 10 % T;
    int d = 0;
    for (int t = 0; t < T; ++t) {
        const int sz = base + (t < extra ? 1 : 0);
        for (int k = 0; k < sz; ++k) groups[t].push_back(d++);
    }
    return groups;
}

inline std::vector<Dataset> make_task_sequence(TaskSequenceKind kind, int T, std::uint64_t seed,
                                               const TaskGenConfig& cfg = {}) {
    detail::require(T >= 1, "make_task_sequence: T must be >= 1");
    std::vector<Dataset> tasks;
    tasks.reserve(T);
    if (kind == TaskSequenceKind::sine || kind == TaskSequenceKind::sine_noisy) {
        Rng param_rng(derive_seed(seed, {0x7370656bULL}));
        for (int t = 0; t < T; ++t) {
            SineTaskSpec spec;
            spec.amplitude = param_rng.uniform(cfg.amp_lo, cfg.amp_hi);
            spec.phase = param_rng.uniform(cfg.phase_lo, cfg.phase_hi);
            spec.frequency = cfg.frequency;
            spec.n_samples = cfg.n_samples;
            spec.lo = cfg.domain_lo;
            spec.hi = cfg.domain_hi;
            spec.noise =
                kind == TaskSequenceKind::sine_noisy ? noise_schedule(t, cfg.noise_base) : 0.0;
            Dataset ds = gen_sine_task(spec, derive_seed(seed, {0x74736bULL, std::uint64_t(t)}));
            ds.task_id = t;
            tasks.push_back(std::move(ds));
        }
        return tasks;
    }
    // image_digits
    detail::require(T <= 10, "make_task_sequence: image_digits supports at most 10 tasks");
    detail::require(cfg.image_source != nullptr && !cfg.image_source->empty(),
                    "make_task_sequence: image_digits needs a source dataset");
    const Dataset& src = *cfg.image_source;
    const auto groups = digit_groups(T);
    Rng angle_rng(derive_seed(seed, {0x616e67ULL}));
    for (int t = 0; t < T; ++t) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < src.size(); ++r) {
            int label = 0;
            for (std::size_t c = 1; c < src.y.cols(); ++c)
                if (src.y(r, c) > src.y(r, label)) label = static_cast<int>(c);
            if (std::find(groups[t].begin(), groups[t].end(), label) != groups[t].end())
                rows.push_back(r);
        }
        Dataset ds = take_rows(src, rows);
        ds.task_id = t;
        const double theta = angle_rng.uniform(0.0, 180.0);
        if (cfg.rotate_shear && t > 0) ds.x = transform_rotate_shear(ds.x, theta);
        tasks.push_back(std::move(ds));
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// Synthetic digit fixture: seven-segment style glyphs with jitter, used when
// no IDX files are supplied.
// ---------------------------------------------------------------------------

namespace detail {

// segments: top, top-left, top-right, middle, bottom-left, bottom-right, bottom
inline constexpr unsigned char kSegments[10] = {
    0b1110111,  // 0
    0b0010010,  // 1
    0b1011101,  // 2
    0b1011011,  // 3
    0b0111010,  // 4
    0b1101011,  // 5
    0b1101111,  // 6
    0b1010010,  // 7
    0b1111111,  // 8
    0b1111011,  // 9
};

inline void draw_line(std::vector<double>& img, double x0, double y0, double x1, double y1,
                      double thickness) {
    const int steps = 40;
    for (int s = 0; s <= steps; ++s) {
        const double f = static_cast<double>(s) / steps;
        const double x = x0 + f * (x1 - x0);
        const double y = y0 + f * (y1 - y0);
        for (int dy = -3; dy <= 3; ++dy) {
            for (int dx = -3; dx <= 3; ++dx) {
                const int xi = static_cast<int>(std::lround(x)) + dx;
                const int yi = static_cast<int>(std::lround(y)) + dy;
                if (xi < 0 || xi >= kImgSide || yi < 0 || yi >= kImgSide) continue;
                const double d2 = (xi - x) * (xi - x) + (yi - y) * (yi - y);
                const double v = std::exp(-d2 / (2.0 * thickness * thickness));
                auto& px = img[yi * kImgSide + xi];
                px = std::max(px, v);
            }
        }
    }
}

}  // namespace detail

inline Dataset synthetic_digits(std::size_t per_class, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x646967ULL}));
    const std::size_t n = per_class * 10;
    Dataset ds;
    ds.x = Matrix(n, detail::kImgSide * detail::kImgSide);
    std::vector<int> labels(n);
    std::size_t row = 0;
    for (int digit = 0; digit < 10; ++digit) {
        for (std::size_t k = 0; k < per_class; ++k) {
            std::vector<double> img(detail::kImgSide * detail::kImgSide, 0.0);
            const double cx = 14.0 + rng.uniform(-1.5, 1.5);
            const double cy = 14.0 + rng.uniform(-1.5, 1.5);
            const double w = 5.0 + rng.uniform(-0.8, 0.8);
            const double h = 8.0 + rng.uniform(-1.0, 1.0);
            const double th = 1.1 + rng.uniform(-0.2, 0.3);
            const unsigned char seg = detail::kSegments[digit];
            const double l = cx - w, r = cx + w, t = cy - h, m = cy, b = cy + h;
            if (seg & 0b1000000) detail::draw_line(img, l, t, r, t, th);
            if (seg & 0b0100000) detail::draw_line(img, l, t, l, m, th);
            if (seg & 0b0010000) detail::draw_line(img, r, t, r, m, th);
            if (seg & 0b0001000) detail::draw_line(img, l, m, r, m, th);
            if (seg & 0b0000100) detail::draw_line(img, l, m, l, b, th);
            if (seg & 0b0000010) detail::draw_line(img, r, m, r, b, th);
            if (seg & 0b0000001) detail::draw_line(img, l, b, r, b, th);
            for (double& v : img) {
                v += rng.uniform(0.0, 0.04);
                v = std::clamp(v, 0.0, 1.0);
            }
            std::copy(img.begin(), img.end(), ds.x.row(row).begin());
            labels[row] = digit;
            ++row;
        }
    }
    ds.y = one_hot(labels, 10);
    return ds;
}

inline void export_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t c = 0; c < ds.x.cols(); ++c) out << "x" << c << ",";
    for (std::size_t c = 0; c < ds.y.cols(); ++c)
        out << "y" << c << (c + 1 < ds.y.cols() ? "," : "\n");
    out.precision(17);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.x.cols(); ++c) out << ds.x(r, c) << ",";
        for (std::size_t c = 0; c < ds.y.cols(); ++c)
            out << ds.y(r, c) << (c + 1 < ds.y.cols() ? "," : "\n");
    }
}

}  // namespace morphcl
