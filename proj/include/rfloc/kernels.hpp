#pragma once

#include <cmath>
#include <string>

#include "rfloc/errors.hpp"

namespace rfloc {

enum class KernelKind { Rbf, Matern15, Matern25, RationalQuadratic };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Stationary kernel value at separation r, unit prior variance.
/// All kinds share the same length-scale convention: ell rescales r.
template <typename Scalar>
Scalar kernel_value(KernelKind kind, Scalar r, Scalar ell, Scalar rq_alpha) {
    const Scalar z = std::abs(r) / ell;
    switch (kind) {
        case KernelKind::Rbf:
            return std::exp(Scalar(-0.5) * z * z);
        case KernelKind::Matern15: {
            const Scalar s = std::sqrt(Scalar(3)) * z;
            return (Scalar(1) + s) * std::exp(-s);
        }
        case KernelKind::Matern25: {
            const Scalar s = std::sqrt(Scalar(5)) * z;
            return (Scalar(1) + s + s * s / Scalar(3)) * std::exp(-s);
        }
        case KernelKind::RationalQuadratic:
            return std::pow(Scalar(1) + z * z / (Scalar(2) * rq_alpha), -rq_alpha);
    }
    return Scalar(0);
}

struct KernelConfig {
    KernelKind kind = KernelKind::Rbf;
    double length_scale = 0.0075; // rad
    double noise_variance = 0.25; // m^2, added to the training diagonal
    double jitter = 0.0;          // extra diagonal added before factorization
    double rq_alpha = 0.25;       // shape parameter of the rational quadratic

    void validate() const {
        if (!(length_scale > 0.0))
            throw ValidationError("kernel config: length_scale must be > 0");
        if (!(noise_variance >= 0.0))
            throw ValidationError("kernel config: noise_variance must be >= 0");
        if (!(jitter >= 0.0))
            throw ValidationError("kernel config: jitter must be >= 0");
        if (!(rq_alpha > 0.0))
            throw ValidationError("kernel config: rq_alpha must be > 0");
    }
};

/// k(x1, x2) for scalar phase inputs.
inline double kernel_eval(const KernelConfig& cfg, double x1, double x2) {
    return kernel_value(cfg.kind, x1 - x2, cfg.length_scale, cfg.rq_alpha);
}

} // namespace rfloc
