#pragma once

#include <cstdint>
#include <Eigen/Dense>

#include "rfloc/errors.hpp"

namespace rfloc {

/// Phase band of the linear delta_phi / distance regime.
struct SegmentationThresholds {
    double phi_min = 0.2; // rad
    double phi_max = 1.2; // rad

    void validate() const {
        if (!(phi_min < phi_max))
            throw ValidationError("segmentation thresholds: phi_min must be < phi_max");
    }
};

/// Three-way data distribution: share inside the linear band, strictly below
/// it, strictly above it. Band boundaries count as inside, so the three
/// counts always partition the input exactly.
struct SegmentationVector {
    double v1 = 0.0; // % inside [phi_min, phi_max]
    double v2 = 0.0; // % strictly below phi_min
    double v3 = 0.0; // % strictly above phi_max
    // Raw counts; present when produced by segment(), -1 when deserialized.
    std::int64_t c1 = -1, c2 = -1, c3 = -1;

    double percentage_sum() const { return v1 + v2 + v3; }
    std::int64_t count_sum() const { return c1 + c2 + c3; }
};

SegmentationVector segment(const Eigen::Ref<const Eigen::VectorXd>& phases,
                           const SegmentationThresholds& thresholds);

/// Euclidean distance between two segmentation vectors, over percentages.
double segmentation_distance(const SegmentationVector& a, const SegmentationVector& b);

} // namespace rfloc
