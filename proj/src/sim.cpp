#include "rfloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

namespace rfloc {

double ideal_phase_difference(double distance_m, double delta_f_hz) {
    if (!(distance_m >= 0.0))
        throw ValidationError("ideal_phase_difference: distance must be >= 0");
    if (!(delta_f_hz > 0.0))
        throw ValidationError("ideal_phase_difference: delta_f must be > 0");
    return 2.0 * kTwoPi * delta_f_hz * distance_m / kSpeedOfLight;
}

double ideal_rssi(double distance_m, const EnvironmentSpec& spec) {
    if (!(distance_m >= 1.0))
        throw ValidationError("ideal_rssi: distance below the 1 m reference");
    return spec.rssi_ref_dbm - 10.0 * spec.path_loss_exponent * std::log10(distance_m);
}

SamplingGrid default_grid() {
    SamplingGrid g;
    for (int i = 0; i <= 26; ++i) g.distances_m.push_back(5.0 + 0.5 * i);
    for (int a = -30; a <= 30; a += 15) g.angles_deg.push_back(static_cast<double>(a));
    return g;
}

std::uint64_t NoiseStream::next_raw() {
    // splitmix64; fully specified, unlike std:: distributions
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double NoiseStream::uniform() {
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double NoiseStream::gaussian(double sigma) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return sigma * r * std::cos(kTwoPi * u2);
}

double NoiseStream::laplace(double scale) {
    const double u = uniform() - 0.5;
    double a = 1.0 - 2.0 * std::abs(u);
    if (a <= 0.0) a = std::numeric_limits<double>::min();
    const double mag = -scale * std::log(a);
    return u < 0.0 ? -mag : mag;
}

bool NoiseStream::bernoulli(double p) {
    return uniform() < p;
}

namespace {

// Depth of the RSSI trough coupled to a multipath phase spike, in dB.
constexpr double kSpikeTroughDb = 6.0;

bool in_dead_zone(const EnvironmentSpec& spec, double d, double angle) {
    return std::any_of(spec.dead_zones.begin(), spec.dead_zones.end(),
                       [&](const DeadZone& z) { return z.contains(d, angle); });
}

SignalSample draw_sample(const EnvironmentSpec& spec, const std::string& tag_id, double t,
                         double d, double angle, NoiseStream& noise) {
    const double ideal = ideal_phase_difference(d, kDefaultF2Hz - kDefaultF1Hz);
    // systematic part of the environment disturbance: a standing-wave ripple
    const double ripple = spec.ripple_amp_rad * std::sin(kTwoPi * d / spec.ripple_period_m);
    const double phase_noise = noise.gaussian(spec.noise_sigma_rad);
    const bool spike_fired = noise.bernoulli(spec.spike_rate);
    double spike = 0.0;
    if (spike_fired) spike = noise.laplace(spec.spike_scale_rad);

    SignalSample s;
    s.tag_id = tag_id;
    s.t = t;
    s.delta_phi = wrap_phase(ideal + spec.phase_offset_rad + ripple + phase_noise + spike);
    s.rssi = ideal_rssi(d, spec);
    if (spike_fired) {
        const double rel = spec.spike_scale_rad > 0.0 ? std::abs(spike) / spec.spike_scale_rad : 0.0;
        s.rssi -= kSpikeTroughDb * (1.0 + rel);
    }
    s.f1 = kDefaultF1Hz;
    s.f2 = kDefaultF2Hz;
    s.angle = angle;
    s.true_distance = d;
    return s;
}

} // namespace

EnvironmentDataset generate_dataset(const EnvironmentSpec& spec, const SamplingGrid& grid,
                                    std::size_t samples_per_position, double rate_hz) {
    spec.validate();
    if (grid.distances_m.empty() || grid.angles_deg.empty())
        throw ValidationError("generate_dataset: grid must be non-empty");
    if (samples_per_position < 1)
        throw ValidationError("generate_dataset: samples_per_position must be >= 1");
    if (!(rate_hz > 0.0))
        throw ValidationError("generate_dataset: rate must be > 0");

    EnvironmentDataset ds;
    ds.env_id = spec.id;
    NoiseStream noise(spec.seed);
    std::size_t emitted = 0;
    for (double d : grid.distances_m) {
        for (double angle : grid.angles_deg) {
            if (in_dead_zone(spec, d, angle)) continue; // tag undetectable: no reads
            for (std::size_t k = 0; k < samples_per_position; ++k) {
                const double t = static_cast<double>(emitted) / rate_hz;
                ds.samples.push_back(draw_sample(spec, "tag-0", t, d, angle, noise));
                ++emitted;
            }
        }
    }
    return ds;
}

std::pair<EnvironmentDataset, EnvironmentDataset>
split_dataset(const EnvironmentDataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("split_dataset: fraction must be in (0,1)");

    // Stratify by exact grid position.
    std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        if (!s.labeled())
            throw ValidationError("split_dataset: stratification requires labeled samples");
        groups[{s.true_distance, s.angle}].push_back(i);
    }
    if (groups.empty())
        throw ValidationError("split_dataset: empty dataset");

    NoiseStream rng(seed);
    std::vector<char> to_train(ds.samples.size(), 0);
    for (auto& [pos, idx] : groups) {
        const std::size_t n = idx.size();
        if (n < 2)
            throw ValidationError("split_dataset: position with fewer than 2 samples cannot be stratified");
        auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
        want = std::clamp<std::size_t>(want, 1, n - 1);
        // Fisher-Yates on the group's index list
        for (std::size_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
            std::swap(idx[i], idx[std::min(j, i)]);
        }
        for (std::size_t i = 0; i < want; ++i) to_train[idx[i]] = 1;
    }

    EnvironmentDataset train, test;
    train.env_id = test.env_id = ds.env_id;
    train.split_fraction = test.split_fraction = fraction;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        (to_train[i] ? train : test).samples.push_back(ds.samples[i]);
    return {std::move(train), std::move(test)};
}

namespace {

// Ping-pong walk between the endpoints at the configured speed.
void track_position(const TrackConfig& cfg, double t, double& d, double& angle) {
    const double span = std::abs(cfg.d_end - cfg.d_start);
    if (span <= 0.0 || cfg.speed_mps <= 0.0) {
        d = cfg.d_start;
        angle = cfg.angle_start;
        return;
    }
    const double period = 2.0 * span / cfg.speed_mps;
    const double phase = std::fmod(t, period);
    const double s = phase < period / 2.0 ? phase * cfg.speed_mps : (period - phase) * cfg.speed_mps;
    const double frac = s / span;
    d = cfg.d_start + (cfg.d_end > cfg.d_start ? s : -s);
    angle = cfg.angle_start + frac * (cfg.angle_end - cfg.angle_start);
}

} // namespace

std::vector<SignalSample> simulate_track(const EnvironmentSpec& spec, const TrackConfig& cfg) {
    spec.validate();
    if (!(cfg.rate_hz > 0.0) || !(cfg.duration_s > 0.0))
        throw ValidationError("simulate_track: rate and duration must be > 0");
    NoiseStream noise(spec.seed ^ cfg.seed);
    std::vector<SignalSample> out;
    const auto ticks = static_cast<std::size_t>(cfg.duration_s * cfg.rate_hz);
    for (std::size_t k = 0; k < ticks; ++k) {
        const double t = static_cast<double>(k) / cfg.rate_hz;
        double d = 0.0, angle = 0.0;
        track_position(cfg, t, d, angle);
        if (in_dead_zone(spec, d, angle)) continue;
        out.push_back(draw_sample(spec, cfg.tag_id, t, d, angle, noise));
    }
    return out;
}

std::vector<SignalSample> simulate_multi_tag_stream(const EnvironmentSpec& spec,
                                                    const std::vector<TrackConfig>& tags) {
    spec.validate();
    if (tags.empty())
        throw ValidationError("simulate_multi_tag_stream: need at least one tag");
    const double rate = tags.front().rate_hz;
    if (!(rate > 0.0))
        throw ValidationError("simulate_multi_tag_stream: rate must be > 0");

    std::vector<SignalSample> out;
    std::vector<NoiseStream> noise;
    noise.reserve(tags.size());
    for (const auto& tc : tags) noise.emplace_back(spec.seed ^ tc.seed);

    const auto ticks = static_cast<std::size_t>(tags.front().duration_s * rate);
    // One tag answers per reader slot; slots rotate round-robin.
    for (std::size_t k = 0; k < ticks; ++k) {
        const std::size_t j = k % tags.size();
        const double t = static_cast<double>(k) / rate;
        double d = 0.0, angle = 0.0;
        track_position(tags[j], t, d, angle);
        if (in_dead_zone(spec, d, angle)) continue;
        out.push_back(draw_sample(spec, tags[j].tag_id, t, d, angle, noise[j]));
    }
    return out;
}

} // namespace rfloc
