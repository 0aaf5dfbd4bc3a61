#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "morphcl/matrix.hpp"

namespace morphcl {

enum class LossKind { mse, cross_entropy_with_logits };

inline std::string to_string(LossKind k) {
    return k == LossKind::mse ? "mse" : "cross_entropy_with_logits";
}

inline LossKind loss_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "cross_entropy_with_logits") return LossKind::cross_entropy_with_logits;
    throw std::invalid_argument("unknown loss name: " + s);
}

namespace detail {

// For cross-entropy the target is either one-hot (same shape as pred) or a
// single column of class labels.
inline std::size_t target_class(const Matrix& target, std::size_t row, std::size_t n_classes) {
    if (target.cols() == 1) {
        const double v = target(row, 0);
        const auto c = static_cast<std::size_t>(v);
        require(v >= 0.0 && c < n_classes && static_cast<double>(c) == v,
                "cross-entropy: label out of range at row " + std::to_string(row));
        return c;
    }
    require(target.cols() == n_classes, "cross-entropy: target shape mismatch");
    std::size_t best = 0;
    double bv = target(row, 0);
    for (std::size_t c = 1; c < n_classes; ++c)
        if (target(row, c) > bv) bv = target(row, c), best = c;
    return best;
}

inline double log_sum_exp(std::span<const double> v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

// Mean over the batch. MSE additionally averages over output dimensions.
inline double loss(const Matrix& pred, const Matrix& target, LossKind kind) {
    detail::require(!pred.empty(), "loss: empty prediction");
    detail::require(pred.all_finite() && target.all_finite(), "loss: non-finite inputs");
    if (kind == LossKind::mse) {
        detail::require(pred.same_shape(target), "loss: mse requires identical shapes");
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred.data()[i] - target.data()[i];
            s += d * d;
        }
        return s / static_cast<double>(pred.size());
    }
    detail::require(pred.rows() == target.rows(), "loss: batch sizes disagree");
    double s = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        const std::size_t cls = detail::target_class(target, r, pred.cols());
        s += detail::log_sum_exp(pred.row(r)) - pred(r, cls);
    }
    return s / static_cast<double>(pred.rows());
}

// d loss / d pred.
inline Matrix loss_grad(const Matrix& pred, const Matrix& target, LossKind kind) {
    Matrix g(pred.rows(), pred.cols());
    if (kind == LossKind::mse) {
        detail::require(pred.same_shape(target), "loss_grad: mse requires identical shapes");
        const double scale = 2.0 / static_cast<double>(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i)
            g.data()[i] = scale * (pred.data()[i] - target.data()[i]);
        return g;
    }
    detail::require(pred.rows() == target.rows(), "loss_grad: batch sizes disagree");
    const double inv_n = 1.0 / static_cast<double>(pred.rows());
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        // softmax with max shift
        double m = pred(r, 0);
        for (std::size_t c = 0; c < pred.cols(); ++c) m = std::max(m, pred(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < pred.cols(); ++c) z += std::exp(pred(r, c) - m);
        for (std::size_t c = 0; c < pred.cols(); ++c) g(r, c) = std::exp(pred(r, c) - m) / z * inv_n;
        g(r, detail::target_class(target, r, pred.cols())) -= inv_n;
    }
    return g;
}

// Classification accuracy; target as one-hot or label column.
inline double accuracy(const Matrix& pred, const Matrix& target) {
    detail::require(pred.rows() == target.rows() && pred.rows() > 0, "accuracy: batch mismatch");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < pred.cols(); ++c)
            if (pred(r, c) > pred(r, arg)) arg = c;
        if (arg == detail::target_class(target, r, pred.cols())) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.rows());
}

}  // namespace morphcl
