#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace morphcl {

enum class ActivationKind { relu, elu, softsign, isrlu, isru, sigmoid, tanh, identity };

// The inverse-square-root units take a shape parameter; it is fixed here.
inline constexpr double kIsrA = 1.0;

inline double activation_value(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::elu: return x >= 0.0 ? x : std::expm1(x);
        case ActivationKind::softsign: return x / (1.0 + std::fabs(x));
        case ActivationKind::isrlu:
            return x >= 0.0 ? x : x / std::sqrt(1.0 + kIsrA * x * x);
        case ActivationKind::isru: return x / std::sqrt(1.0 + kIsrA * x * x);
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::tanh: return std::tanh(x);
        case ActivationKind::identity: return x;
    }
    throw std::logic_error("unknown activation kind");
}

// First derivative. ReLU uses the subgradient value 0 at the kink.
inline double activation_deriv(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::elu: return x >= 0.0 ? 1.0 : std::exp(x);
        case ActivationKind::softsign: {
            const double d = 1.0 + std::fabs(x);
            return 1.0 / (d * d);
        }
        case ActivationKind::isrlu: {
            if (x >= 0.0) return 1.0;
            const double d = 1.0 + kIsrA * x * x;
            return 1.0 / (d * std::sqrt(d));
        }
        case ActivationKind::isru: {
            const double d = 1.0 + kIsrA * x * x;
            return 1.0 / (d * std::sqrt(d));
        }
        case ActivationKind::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case ActivationKind::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::identity: return 1.0;
    }
    throw std::logic_error("unknown activation kind");
}

inline std::string to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::elu: return "elu";
        case ActivationKind::softsign: return "softsign";
        case ActivationKind::isrlu: return "isrlu";
        case ActivationKind::isru: return "isru";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::identity: return "identity";
    }
    throw std::logic_error("unknown activation kind");
}

inline ActivationKind activation_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::relu;
    if (s == "elu") return ActivationKind::elu;
    if (s == "softsign") return ActivationKind::softsign;
    if (s == "isrlu") return ActivationKind::isrlu;
    if (s == "isru") return ActivationKind::isru;
    if (s == "sigmoid") return ActivationKind::sigmoid;
    if (s == "tanh") return ActivationKind::tanh;
    if (s == "identity") return ActivationKind::identity;
    throw std::invalid_argument("unknown activation name: " + s);
}

}  // namespace morphcl
