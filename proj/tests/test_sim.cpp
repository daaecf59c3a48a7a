#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rfloc/sim.hpp"

using namespace rfloc;

namespace {

EnvironmentSpec clean_spec() {
    EnvironmentSpec spec;
    spec.id = "test-env";
    spec.path_loss_exponent = 2.0;
    spec.rssi_ref_dbm = -40.0;
    spec.seed = 42;
    return spec;
}

} // namespace

TEST_CASE("ideal phase difference") {
    CHECK(ideal_phase_difference(0.0, 1e6) == 0.0);

    // hand evaluation at 15 m, 1 MHz
    const double expected = 4.0 * M_PI * 1e6 * 15.0 / 299792458.0;
    CHECK(ideal_phase_difference(15.0, 1e6) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ideal_phase_difference(15.0, 1e6) == doctest::Approx(0.62832).epsilon(1e-3));

    // linear in distance
    CHECK(ideal_phase_difference(7.5, 1e6) == 0.5 * ideal_phase_difference(15.0, 1e6));

    // strictly increasing in d
    double prev = -1.0;
    for (double d = 0.5; d < 30.0; d += 0.5) {
        const double v = ideal_phase_difference(d, 1e6);
        CHECK(v > prev);
        prev = v;
    }

    CHECK_THROWS_AS((void)ideal_phase_difference(-1.0, 1e6), ValidationError);
    CHECK_THROWS_AS((void)ideal_phase_difference(5.0, 0.0), ValidationError);
    CHECK_THROWS_AS((void)ideal_phase_difference(5.0, -1e6), ValidationError);
}

TEST_CASE("ideal rssi follows the log-distance law") {
    auto spec = clean_spec();
    CHECK(ideal_rssi(1.0, spec) == doctest::Approx(-40.0));
    CHECK(ideal_rssi(10.0, spec) == doctest::Approx(-60.0));
    CHECK(ideal_rssi(100.0, spec) == doctest::Approx(-80.0));
    CHECK_THROWS_AS((void)ideal_rssi(0.5, spec), ValidationError);

    // strictly decreasing
    double prev = 0.0;
    for (double d = 1.0; d < 40.0; d += 0.5) {
        const double v = ideal_rssi(d, spec);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("default grid matches the documented mapping run") {
    const auto grid = default_grid();
    CHECK(grid.distances_m.size() == 27);
    CHECK(grid.angles_deg.size() == 5);
    CHECK(grid.positions() == 135);
    CHECK(grid.distances_m.front() == doctest::Approx(5.0));
    CHECK(grid.distances_m.back() == doctest::Approx(18.0));

    // ideal phase stays inside one wrap period across the grid
    for (double d : grid.distances_m)
        CHECK(ideal_phase_difference(d, kDefaultF2Hz - kDefaultF1Hz) < kTwoPi);
}

TEST_CASE("generate_dataset on the default grid") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.01;
    spec.spike_rate = 0.02;
    spec.spike_scale_rad = 0.4;
    const auto ds = generate_dataset(spec, default_grid(), 200, 50.0);
    CHECK(ds.size() == 27000);
    CHECK(ds.size() <= 27000);
    CHECK(ds.env_id == "test-env");
    for (std::size_t i = 1; i < ds.samples.size(); ++i)
        CHECK(ds.samples[i].t > ds.samples[i - 1].t);
}

TEST_CASE("noiseless dataset reproduces the ideal phase curve exactly") {
    auto spec = clean_spec(); // all noise terms zero
    const auto ds = generate_dataset(spec, default_grid(), 5, 50.0);
    for (const auto& s : ds.samples) {
        const double ideal = wrap_phase(ideal_phase_difference(s.true_distance, s.f2 - s.f1));
        CHECK(s.delta_phi == ideal);
        CHECK(s.rssi == doctest::Approx(ideal_rssi(s.true_distance, spec)));
    }
}

TEST_CASE("dead zones emit no samples") {
    auto spec = clean_spec();
    spec.dead_zones.push_back({10.0, 11.0, -30.0, 30.0});
    SamplingGrid grid;
    for (double d = 9.0; d <= 12.0 + 1e-9; d += 0.5) grid.distances_m.push_back(d);
    grid.angles_deg = {-30.0, 0.0, 30.0};
    const auto ds = generate_dataset(spec, grid, 10, 50.0);
    std::set<double> seen;
    for (const auto& s : ds.samples) {
        seen.insert(s.true_distance);
        CHECK((s.true_distance < 10.0 || s.true_distance > 11.0));
    }
    CHECK(seen.count(9.0) == 1);
    CHECK(seen.count(12.0) == 1);
    CHECK(ds.size() == (7 - 3) * 3 * 10);
}

TEST_CASE("identical spec and seed reproduce the stream bit for bit") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.02;
    spec.spike_rate = 0.1;
    spec.spike_scale_rad = 0.5;
    SamplingGrid grid;
    grid.distances_m = {6.0, 9.0, 12.0};
    grid.angles_deg = {-15.0, 15.0};
    const auto a = generate_dataset(spec, grid, 50, 50.0);
    const auto b = generate_dataset(spec, grid, 50, 50.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].delta_phi == b.samples[i].delta_phi);
        CHECK(a.samples[i].rssi == b.samples[i].rssi);
        CHECK(a.samples[i].t == b.samples[i].t);
    }
    spec.seed += 1;
    const auto c = generate_dataset(spec, grid, 50, 50.0);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.samples[i].delta_phi != c.samples[i].delta_phi;
    CHECK(any_diff);
}

TEST_CASE("systematic ripple enters the phase deterministically") {
    auto spec = clean_spec();
    spec.phase_offset_rad = 0.1;
    spec.ripple_amp_rad = 0.02;
    spec.ripple_period_m = 1.7;
    SamplingGrid grid;
    grid.distances_m = {6.0, 9.3, 14.1};
    grid.angles_deg = {0.0};
    const auto ds = generate_dataset(spec, grid, 4, 50.0);
    for (const auto& s : ds.samples) {
        const double expected =
            wrap_phase(ideal_phase_difference(s.true_distance, s.f2 - s.f1) + 0.1 +
                       0.02 * std::sin(kTwoPi * s.true_distance / 1.7));
        CHECK(s.delta_phi == expected);
    }
    spec.ripple_amp_rad = -0.1;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.ripple_amp_rad = 0.02;
    spec.ripple_period_m = 0.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("phase spikes coincide with rssi troughs") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.0; // spikes are the only phase disturbance
    spec.spike_rate = 0.3;
    spec.spike_scale_rad = 0.6;
    const auto ds = generate_dataset(spec, default_grid(), 20, 50.0);
    std::size_t spikes = 0;
    for (const auto& s : ds.samples) {
        const double ideal_phi = wrap_phase(ideal_phase_difference(s.true_distance, s.f2 - s.f1));
        const double ideal_db = ideal_rssi(s.true_distance, spec);
        if (s.delta_phi != ideal_phi) {
            ++spikes;
            CHECK(s.rssi < ideal_db); // spike fired -> rssi strictly below the curve
        } else {
            CHECK(s.rssi == doctest::Approx(ideal_db));
        }
    }
    // roughly the configured rate
    const double rate = static_cast<double>(spikes) / static_cast<double>(ds.size());
    CHECK(rate == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("split_dataset is stratified, disjoint and covering") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.01;
    SamplingGrid grid;
    grid.distances_m = {6.0, 8.0, 10.0, 12.0, 14.0};
    grid.angles_deg = {0.0};
    const auto ds = generate_dataset(spec, grid, 200, 50.0); // 1000 samples
    const auto [train, test] = split_dataset(ds, 0.8, 7);
    CHECK(train.size() == 800);
    CHECK(test.size() == 200);
    CHECK(train.size() + test.size() == ds.size());

    // deterministic under the same seed
    const auto [train2, test2] = split_dataset(ds, 0.8, 7);
    REQUIRE(train2.size() == train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(train.samples[i].t == train2.samples[i].t);

    // every grid position is represented in the training side
    std::set<double> train_positions;
    for (const auto& s : train.samples) train_positions.insert(s.true_distance);
    CHECK(train_positions.size() == 5);

    // disjointness via unique timestamps
    std::set<double> train_t, test_t;
    for (const auto& s : train.samples) train_t.insert(s.t);
    for (const auto& s : test.samples) test_t.insert(s.t);
    for (double t : test_t) CHECK(train_t.count(t) == 0);
}

TEST_CASE("split_dataset halves two-sample positions and rejects singletons") {
    EnvironmentDataset ds;
    ds.env_id = "tiny";
    for (double d : {5.0, 7.0}) {
        for (int k = 0; k < 2; ++k) {
            SignalSample s;
            s.tag_id = "tag-0";
            s.t = d + k * 0.1;
            s.delta_phi = 0.3;
            s.f1 = kDefaultF1Hz;
            s.f2 = kDefaultF2Hz;
            s.true_distance = d;
            ds.samples.push_back(s);
        }
    }
    const auto [train, test] = split_dataset(ds, 0.5, 3);
    CHECK(train.size() == 2);
    CHECK(test.size() == 2);

    SignalSample lone;
    lone.tag_id = "tag-0";
    lone.t = 99.0;
    lone.delta_phi = 0.4;
    lone.f1 = kDefaultF1Hz;
    lone.f2 = kDefaultF2Hz;
    lone.true_distance = 9.0;
    ds.samples.push_back(lone);
    CHECK_THROWS_AS((void)split_dataset(ds, 0.5, 3), ValidationError);
    CHECK_THROWS_AS((void)split_dataset(ds, 1.5, 3), ValidationError);
}

TEST_CASE("simulated tracks stay on the path and honor dead zones") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.01;
    spec.dead_zones.push_back({9.0, 9.5, -90.0, 90.0});
    TrackConfig tc;
    tc.tag_id = "walker";
    tc.duration_s = 30.0;
    tc.d_start = 6.0;
    tc.d_end = 12.0;
    tc.speed_mps = 1.2;
    const auto track = simulate_track(spec, tc);
    CHECK(!track.empty());
    for (std::size_t i = 0; i < track.size(); ++i) {
        const auto& s = track[i];
        CHECK(s.tag_id == "walker");
        CHECK(s.true_distance >= 6.0 - 1e-9);
        CHECK(s.true_distance <= 12.0 + 1e-9);
        CHECK((s.true_distance < 9.0 || s.true_distance > 9.5)); // dead zone dropped
        if (i > 0) CHECK(s.t > track[i - 1].t);
    }
}

TEST_CASE("multi-tag streams interleave one tag per slot") {
    auto spec = clean_spec();
    spec.noise_sigma_rad = 0.01;
    std::vector<TrackConfig> tags;
    for (int i = 0; i < 4; ++i) {
        TrackConfig tc;
        tc.tag_id = "tag-" + std::to_string(i);
        tc.duration_s = 10.0;
        tc.d_start = 6.0 + i;
        tc.d_end = 13.0 - i;
        tc.seed = 100 + static_cast<std::uint64_t>(i);
        tags.push_back(tc);
    }
    const auto stream = simulate_multi_tag_stream(spec, tags);
    CHECK(!stream.empty());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        ids.insert(stream[i].tag_id);
        if (i > 0) CHECK(stream[i].t > stream[i - 1].t); // one tag per reader slot
    }
    CHECK(ids.size() == 4);
}
