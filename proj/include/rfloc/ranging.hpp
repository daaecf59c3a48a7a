#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rfloc/types.hpp"

namespace rfloc {

struct AntennaPose {
    std::string id;
    Eigen::Vector2d position = Eigen::Vector2d::Zero(); // meters
    double boresight_deg = 0.0;

    void validate() const {
        if (!position.allFinite())
            throw ValidationError("antenna pose '" + id + "': non-finite coordinates");
    }
};

struct RangeObservation {
    std::string antenna_id;
    double t = 0.0;
    double range = 0.0;    // meters
    double variance = 0.0; // m^2

    void validate() const {
        if (!(range > 0.0))
            throw ValidationError("range observation: range must be > 0");
        if (!(variance >= 0.0))
            throw ValidationError("range observation: variance must be >= 0");
    }
};

struct TrackMetrics {
    double mean_abs = 0.0;
    double rmse = 0.0;
    double p90 = 0.0;
};

/// Mean true distance of the k training samples nearest to `query_phi` in
/// phase difference; distance ties resolve to earlier sample order.
double knn_range(const EnvironmentDataset& train, double query_phi, std::size_t k);

/// Per-step clamp: out[i] may deviate from out[i-1] by at most `bound`.
/// `bound` is meters per update step; with `per_second` it is m/s and gets
/// scaled by each step's dt. `init` anchors the first sample (defaults to
/// raw[0]). Timestamps must be strictly increasing.
std::vector<double> kinematic_constrain(const std::vector<double>& times,
                                        const std::vector<double>& raw_ranges, double bound = 2.0,
                                        std::optional<double> init = std::nullopt,
                                        bool per_second = false);

/// Damped Gauss-Newton solve of
///   min_x  sum_i (d_i - ||a_i - x||)^2
/// started from `prior`, else a closed-form linearization (three or more
/// non-collinear anchors), else the inverse-range-weighted centroid.
/// Converges when the step norm drops below 1e-9 (max 100 iterations);
/// the returned point never has a larger residual than the start. With two
/// anchors the mirror ambiguity is resolved by the prior's basin.
Eigen::Vector2d solve_position(const std::vector<RangeObservation>& observations,
                               const std::vector<AntennaPose>& antennas,
                               std::optional<Eigen::Vector2d> prior = std::nullopt);

/// Linear-interpolation percentile of unsorted values, q in [0,1].
double percentile_linear(std::vector<double> values, double q);

/// Metrics of |estimate - truth| over a range track.
TrackMetrics evaluate_track(const std::vector<double>& estimates,
                            const std::vector<double>& truth);

/// Metrics of the Euclidean position error over a 2-D track.
TrackMetrics evaluate_track(const std::vector<Eigen::Vector2d>& estimates,
                            const std::vector<Eigen::Vector2d>& truth);

} // namespace rfloc
