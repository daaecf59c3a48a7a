#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rfloc/errors.hpp"

namespace rfloc {

/// Speed of light [m/s].
inline constexpr double kSpeedOfLight = 299'792'458.0;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Wrap a phase value into [0, 2*pi).
inline double wrap_phase(double phi) {
    double w = std::fmod(phi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod can round back up to the period itself
    if (w >= kTwoPi) w = 0.0;
    return w;
}

/// Rectangular no-read region: tags inside it produce no samples.
struct DeadZone {
    double d_lo = 0.0;    // meters, inclusive
    double d_hi = 0.0;
    double angle_lo = 0.0; // degrees, inclusive
    double angle_hi = 0.0;

    bool contains(double d, double angle_deg) const {
        return d >= d_lo && d <= d_hi && angle_deg >= angle_lo && angle_deg <= angle_hi;
    }
};

/// Everything that defines one synthetic RF environment.
struct EnvironmentSpec {
    std::string id;
    double path_loss_exponent = 2.0; // n, dimensionless, > 0
    double rssi_ref_dbm = -40.0;     // RSSI at the 1 m reference distance
    double phase_offset_rad = 0.0;   // systematic reader/environment offset added to delta_phi
    double noise_sigma_rad = 0.0;    // Gaussian phase noise
    double spike_rate = 0.0;         // multipath spike probability per sample, in [0,1]
    double spike_scale_rad = 0.0;    // Laplace scale of spike magnitudes
    double ripple_amp_rad = 0.0;     // systematic standing-wave ripple amplitude
    double ripple_period_m = 1.0;    // ripple period along distance
    std::vector<DeadZone> dead_zones;
    std::uint64_t seed = 0;

    void validate() const {
        if (id.empty())
            throw ValidationError("environment spec: id must be non-empty");
        if (!(path_loss_exponent > 0.0))
            throw ValidationError("environment spec '" + id + "': path_loss_exponent must be > 0");
        if (!(noise_sigma_rad >= 0.0))
            throw ValidationError("environment spec '" + id + "': noise_sigma_rad must be >= 0");
        if (!(spike_rate >= 0.0 && spike_rate <= 1.0))
            throw ValidationError("environment spec '" + id + "': spike_rate must be in [0,1]");
        if (!(spike_scale_rad >= 0.0))
            throw ValidationError("environment spec '" + id + "': spike_scale_rad must be >= 0");
        if (!(ripple_amp_rad >= 0.0))
            throw ValidationError("environment spec '" + id + "': ripple_amp_rad must be >= 0");
        if (!(ripple_period_m > 0.0))
            throw ValidationError("environment spec '" + id + "': ripple_period_m must be > 0");
        for (const auto& z : dead_zones) {
            if (!(z.d_lo < z.d_hi) || !(z.angle_lo < z.angle_hi))
                throw ValidationError("environment spec '" + id + "': degenerate dead zone interval");
        }
    }
};

/// One reader observation of one tag.
struct SignalSample {
    std::string tag_id;
    double t = 0.0;          // seconds
    double delta_phi = 0.0;  // rad, wrapped to [0, 2*pi)
    double rssi = 0.0;       // dBm
    double f1 = 0.0;         // Hz
    double f2 = 0.0;         // Hz, f2 > f1
    double angle = 0.0;      // degrees, bearing from the reader boresight
    double true_distance = std::numeric_limits<double>::quiet_NaN(); // meters; NaN when unlabeled

    bool labeled() const { return !std::isnan(true_distance); }
};

/// Labeled sample collection for one environment.
struct EnvironmentDataset {
    std::string env_id;
    std::vector<SignalSample> samples;
    double split_fraction = 0.8; // train share, in (0,1)

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

/// Measurement grid: outer product of distances and angles.
struct SamplingGrid {
    std::vector<double> distances_m;
    std::vector<double> angles_deg;

    std::size_t positions() const { return distances_m.size() * angles_deg.size(); }
};

} // namespace rfloc
