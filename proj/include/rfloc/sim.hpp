#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rfloc/types.hpp"

namespace rfloc {

/// Unwrapped phase difference 4*pi*df*d/c of a backscattered tag at distance
/// d observed at two carriers df apart.
double ideal_phase_difference(double distance_m, double delta_f_hz);

/// Log-distance path loss relative to the 1 m reference.
double ideal_rssi(double distance_m, const EnvironmentSpec& spec);

/// Default carrier pair: 902.75 / 903.75 MHz.
inline constexpr double kDefaultF1Hz = 902.75e6;
inline constexpr double kDefaultF2Hz = 903.75e6;

/// Default mapping grid: 135 positions (27 distances x 5 angles), chosen so
/// the ideal phase difference spans the documented linear band without
/// wrapping.
SamplingGrid default_grid();

/// Counter-based generator: every sample's noise is a pure function of
/// (seed, stream index), so streams are reproducible bit-for-bit regardless
/// of platform or standard library.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : state_(seed) {}

    double uniform();                 // [0, 1)
    double gaussian(double sigma);    // Box-Muller
    double laplace(double scale);     // inverse CDF
    bool bernoulli(double p);

private:
    std::uint64_t next_raw();
    std::uint64_t state_;
};

/// Mapping run over a grid: samples_per_position reads at each (d, angle),
/// zero reads inside dead zones. Timestamps advance at `rate_hz` over the
/// whole emission order.
EnvironmentDataset generate_dataset(const EnvironmentSpec& spec, const SamplingGrid& grid,
                                    std::size_t samples_per_position, double rate_hz);

/// Stratified train/test split: every grid position keeps at least one
/// sample on each side, sizes respect `fraction` within one sample.
std::pair<EnvironmentDataset, EnvironmentDataset>
split_dataset(const EnvironmentDataset& ds, double fraction, std::uint64_t seed);

/// A tag walking through the environment while the reader samples it.
struct TrackConfig {
    std::string tag_id = "tag-0";
    double duration_s = 60.0;
    double rate_hz = 50.0;
    double d_start = 8.0;   // meters
    double d_end = 14.0;
    double angle_start = -10.0; // degrees
    double angle_end = 10.0;
    double speed_mps = 1.3;     // cap on |d'| along the walk
    std::uint64_t seed = 0;
};

/// Simulates one moving tag; samples inside dead zones are dropped (no read).
std::vector<SignalSample> simulate_track(const EnvironmentSpec& spec, const TrackConfig& cfg);

/// Interleaves one track per config at the shared rate, one tag per time
/// slot, sorted by timestamp.
std::vector<SignalSample> simulate_multi_tag_stream(const EnvironmentSpec& spec,
                                                    const std::vector<TrackConfig>& tags);

} // namespace rfloc
