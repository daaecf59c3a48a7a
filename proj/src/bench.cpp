#include "rfloc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rfloc/gp.hpp"
#include "rfloc/io.hpp"
#include "rfloc/pipeline.hpp"
#include "rfloc/presets.hpp"
#include "rfloc/ranging.hpp"
#include "rfloc/sim.hpp"

namespace rfloc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& dissimilar_preset_ids() {
    static const std::vector<std::string> ids = {"env-c", "env-d", "env-e", "env-f"};
    return ids;
}

const std::pair<std::string, std::string>& similar_preset_pair() {
    static const std::pair<std::string, std::string> p = {"env-a", "env-b"};
    return p;
}

BenchThresholds load_bench_thresholds(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open thresholds file: " + path.string());
    BenchThresholds t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r\n") != std::string::npos)
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::istringstream ks(line.substr(0, eq)), vs(line.substr(eq + 1));
        std::string key;
        double v = 0.0;
        ks >> key;
        if (!(vs >> v))
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad value");
        if (key == "gp_oracle_rel_err") t.gp_oracle_rel_err = v;
        else if (key == "gp_oracle_max_seconds") t.gp_oracle_max_seconds = v;
        else if (key == "trilateration_tol_m") t.trilateration_tol_m = v;
        else if (key == "trilateration_max_seconds") t.trilateration_max_seconds = v;
        else if (key == "knn_win_min_envs") t.knn_win_min_envs = static_cast<int>(v);
        else if (key == "matched_win_min_envs") t.matched_win_min_envs = static_cast<int>(v);
        else if (key == "selection_trials") t.selection_trials = static_cast<int>(v);
        else if (key == "selection_accuracy_min") t.selection_accuracy_min = v;
        else if (key == "constrained_mean_max_m") t.constrained_mean_max_m = v;
        else if (key == "constrained_submeter_min_envs") t.constrained_submeter_min_envs = static_cast<int>(v);
        else if (key == "multitag_z_max") t.multitag_z_max = v;
        else if (key == "unseen_full_mean_max_m") t.unseen_full_mean_max_m = v;
        else if (key == "throughput_min_tags_per_min") t.throughput_min_tags_per_min = v;
        else throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return t;
}

bool ExperimentResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string ExperimentResult::summary() const {
    std::ostringstream out;
    out << "experiment: " << name << "\n";
    for (const auto& c : checks)
        out << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << " — " << c.detail << "\n";
    out << (passed() ? "result: PASS" : "result: FAIL") << "\n";
    return out.str();
}

ordered_json ExperimentResult::to_json() const {
    ordered_json j;
    j["experiment"] = name;
    j["seeds"] = seeds;
    j["details"] = details;
    auto arr = ordered_json::array();
    for (const auto& c : checks)
        arr.push_back(ordered_json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = arr;
    j["passed"] = passed();
    return j;
}

void write_experiment(const fs::path& out_dir, const ExperimentResult& result) {
    const fs::path dir = out_dir / result.name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    {
        std::ofstream out(dir / "result.json", std::ios::binary);
        out << result.to_json().dump(2) << "\n";
        if (!out)
            throw IoError("write failed: " + (dir / "result.json").string());
    }
    {
        std::ofstream out(dir / "summary.txt", std::ios::binary);
        out << result.summary();
    }
    if (!result.timing.is_null()) {
        std::ofstream out(dir / "timing.txt", std::ios::binary);
        out << result.timing.dump(2) << "\n";
    }
}

namespace {

constexpr std::size_t kSamplesPerPosition = 200;
constexpr double kRateHz = 50.0;
constexpr double kSplitFraction = 0.8;
constexpr std::size_t kEvalDigest = 2000;      // test samples per error estimate
constexpr std::size_t kSelectionCap = 512;     // training cap for classification trials
constexpr std::size_t kSelectionSubset = 1500; // sparse-subset size per trial
constexpr double kTrackDuration = 120.0;

EnvironmentDataset generate_for(const EnvironmentSpec& preset, const BenchConfig& cfg) {
    EnvironmentSpec spec = preset;
    spec.seed = preset.seed + cfg.seed; // --seed shifts every stream
    return generate_dataset(spec, default_grid(), kSamplesPerPosition, kRateHz);
}

EnvironmentDataset stride_subset(const EnvironmentDataset& ds, std::size_t cap) {
    if (ds.size() <= cap) return ds;
    EnvironmentDataset out;
    out.env_id = ds.env_id;
    out.split_fraction = ds.split_fraction;
    for (std::size_t i = 0; i < cap; ++i)
        out.samples.push_back(ds.samples[i * ds.size() / cap]);
    return out;
}

struct ErrStats {
    double mean_abs = 0.0;
    double rmse = 0.0;
    double p90 = 0.0;
    double std_abs = 0.0;
    std::size_t n = 0;
};

ErrStats error_stats(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    ErrStats s;
    s.n = static_cast<std::size_t>(pred.size());
    std::vector<double> abs_err(s.n);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) {
        const double e = std::abs(pred[static_cast<Eigen::Index>(i)] - truth[static_cast<Eigen::Index>(i)]);
        abs_err[i] = e;
        sum += e;
        sum2 += e * e;
    }
    const auto n = static_cast<double>(s.n);
    s.mean_abs = sum / n;
    s.rmse = std::sqrt(sum2 / n);
    double var = 0.0;
    for (double e : abs_err) var += (e - s.mean_abs) * (e - s.mean_abs);
    s.std_abs = s.n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    s.p90 = percentile_linear(std::move(abs_err), 0.9);
    return s;
}

std::vector<TrackConfig> make_tag_tracks(std::size_t n_tags, std::uint64_t seed, double duration) {
    std::vector<TrackConfig> tags;
    tags.reserve(n_tags);
    for (std::size_t i = 0; i < n_tags; ++i) {
        TrackConfig tc;
        tc.tag_id = "tag-" + std::to_string(i);
        tc.duration_s = duration;
        tc.rate_hz = kRateHz;
        const auto fi = static_cast<double>(i);
        tc.d_start = 5.5 + std::fmod(0.83 * fi, 11.5);
        tc.d_end = 17.0 - std::fmod(0.67 * fi, 11.0);
        tc.angle_start = -28.0 + std::fmod(7.3 * fi, 56.0);
        tc.angle_end = 28.0 - std::fmod(9.1 * fi, 56.0);
        tc.speed_mps = 1.0 + 0.04 * static_cast<double>(i % 8);
        tc.seed = seed + 17 * i + 1;
        tags.push_back(tc);
    }
    return tags;
}

ordered_json stats_json(const ErrStats& s) {
    return ordered_json{{"mean_abs", s.mean_abs}, {"rmse", s.rmse}, {"p90", s.p90}, {"n", s.n}};
}

} // namespace

PresetBundle build_preset_bundle(const BenchConfig& cfg, std::size_t cap) {
    PresetBundle bundle;
    bundle.specs = load_presets(cfg.preset_dir);
    if (bundle.specs.empty())
        throw ValidationError("no presets found in " + cfg.preset_dir.string());
    KernelConfig kernel; // defaults: RBF, 0.0075 rad, noise 0.25 m^2
    for (const auto& spec : bundle.specs) {
        const auto ds = generate_for(spec, cfg);
        auto [train, test] = split_dataset(ds, kSplitFraction, spec.seed ^ 0x5eedULL ^ cfg.seed);
        bundle.dict.models.push_back(
            GpEnvironmentModel::train(train, kernel, cap, bundle.dict.thresholds));
        bundle.train_sets.push_back(std::move(train));
        bundle.test_sets.push_back(std::move(test));
    }
    bundle.dict.validate();
    return bundle;
}

ExperimentResult exp_kernel_table(const BenchConfig& cfg) {
    ExperimentResult result;
    result.name = "kernel_table";
    result.seeds = {cfg.seed};

    const auto presets = load_presets(cfg.preset_dir);
    const auto spec_d = preset_by_id(presets, "env-d");
    const auto spec_f = preset_by_id(presets, "env-f");
    const auto cap = std::min<std::size_t>(cfg.cap, 1200);

    const auto ds_d = generate_for(spec_d, cfg);
    const auto ds_f = generate_for(spec_f, cfg);
    auto [train_d, test_d] = split_dataset(ds_d, kSplitFraction, spec_d.seed ^ 0x5eedULL ^ cfg.seed);
    auto [train_f, test_f] = split_dataset(ds_f, kSplitFraction, spec_f.seed ^ 0x5eedULL ^ cfg.seed);

    // deployment-grade metric: kinematically constrained range estimates on
    // a walking-tag stream through env-d
    EnvironmentSpec track_spec = spec_d;
    track_spec.seed = spec_d.seed + cfg.seed + 1313;
    TrackConfig tc;
    tc.tag_id = "tag-0";
    tc.duration_s = 4.0 * kTrackDuration; // long walk: the kernel gaps are small
    tc.d_start = 6.0;
    tc.d_end = 16.5;
    tc.speed_mps = 1.25;
    tc.angle_start = -20.0;
    tc.angle_end = 20.0;
    tc.seed = cfg.seed + 77;
    const auto stream = simulate_track(track_spec, tc);
    std::vector<double> times;
    Eigen::VectorXd phases(static_cast<Eigen::Index>(stream.size()));
    std::vector<double> truth(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
        times.push_back(stream[i].t);
        phases[static_cast<Eigen::Index>(i)] = stream[i].delta_phi;
        truth[i] = stream[i].true_distance;
    }

    const auto constrained_rmse = [&](const GpEnvironmentModel& model) {
        const Eigen::VectorXd raw = model.predict_mean(phases);
        const std::vector<double> raw_v(raw.begin(), raw.end());
        const auto kin = kinematic_constrain(times, raw_v, 2.0);
        double s2 = 0.0;
        for (std::size_t i = 0; i < kin.size(); ++i)
            s2 += (kin[i] - truth[i]) * (kin[i] - truth[i]);
        return std::sqrt(s2 / static_cast<double>(kin.size()));
    };

    const KernelKind kinds[] = {KernelKind::Rbf, KernelKind::Matern15, KernelKind::Matern25,
                                KernelKind::RationalQuadratic};
    double rbf_correct = 0.0, rbf_incorrect = 0.0;
    double best_other = std::numeric_limits<double>::infinity();
    auto table = ordered_json::array();
    for (const auto kind : kinds) {
        KernelConfig kernel;
        kernel.kind = kind;
        const auto model_d = GpEnvironmentModel::train(train_d, kernel, cap);
        const auto model_f = GpEnvironmentModel::train(train_f, kernel, cap);
        const double correct = constrained_rmse(model_d);
        const double incorrect = constrained_rmse(model_f);
        table.push_back(ordered_json{{"kernel", to_string(kind)},
                                     {"correct_env_rmse", correct},
                                     {"incorrect_env_rmse", incorrect}});
        if (kind == KernelKind::Rbf) {
            rbf_correct = correct;
            rbf_incorrect = incorrect;
        } else {
            best_other = std::min(best_other, correct);
        }
    }
    result.details["pair"] = ordered_json{{"correct", "env-d"}, {"incorrect", "env-f"}};
    result.details["training_cap"] = cap;
    result.details["evaluation"] = "kinematically constrained walking-tag stream";
    result.details["table"] = table;

    {
        std::ostringstream d;
        d << "rbf correct-env rmse " << rbf_correct << " vs best other " << best_other;
        result.checks.push_back({"rbf_lowest_correct_rmse", rbf_correct < best_other, d.str()});
    }
    {
        std::ostringstream d;
        d << "rbf correct " << rbf_correct << " <= incorrect " << rbf_incorrect;
        result.checks.push_back({"rbf_correct_le_incorrect", rbf_correct <= rbf_incorrect, d.str()});
    }
    return result;
}

ExperimentResult exp_model_choice(const BenchConfig& cfg) {
    ExperimentResult result;
    result.name = "model_choice";
    result.seeds = {cfg.seed};

    const auto bundle = build_preset_bundle(cfg, cfg.cap);
    const auto n_env = bundle.specs.size();

    int matched_wins = 0, knn_wins = 0;
    auto rows = ordered_json::array();
    for (std::size_t e = 0; e < n_env; ++e) {
        const auto eval_set = stride_subset(bundle.test_sets[e], kEvalDigest);
        const auto truth = distance_vector(eval_set);
        const auto phases = phase_vector(eval_set);

        ordered_json row;
        row["test_env"] = bundle.specs[e].id;
        double matched_err = 0.0;
        double best_mismatched = std::numeric_limits<double>::infinity();
        auto per_model = ordered_json::array();
        for (std::size_t m = 0; m < n_env; ++m) {
            const auto stats = error_stats(bundle.dict.models[m].predict_mean(phases), truth);
            per_model.push_back(ordered_json{{"model", bundle.specs[m].id},
                                             {"mean_abs", stats.mean_abs},
                                             {"p90", stats.p90}});
            if (m == e)
                matched_err = stats.mean_abs;
            else
                best_mismatched = std::min(best_mismatched, stats.mean_abs);
        }
        row["gp"] = per_model;

        // matched KNN baseline at the configured k, plus the usual sweep;
        // one neighbor pass per query serves every k
        std::vector<int> ks = {1, 3, 5, 9};
        if (std::find(ks.begin(), ks.end(), cfg.knn_k) == ks.end()) ks.push_back(cfg.knn_k);
        const auto k_max = static_cast<std::size_t>(*std::max_element(ks.begin(), ks.end()));
        const auto& train_samples = bundle.train_sets[e].samples;
        std::vector<std::pair<double, std::size_t>> gaps(train_samples.size());
        std::vector<double> err_sum(ks.size(), 0.0);
        for (Eigen::Index q = 0; q < phases.size(); ++q) {
            for (std::size_t i = 0; i < train_samples.size(); ++i)
                gaps[i] = {std::abs(train_samples[i].delta_phi - phases[q]), i};
            std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(k_max - 1),
                             gaps.end());
            std::sort(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(k_max));
            double acc = 0.0;
            for (std::size_t i = 0; i < k_max; ++i) {
                acc += train_samples[gaps[i].second].true_distance;
                for (std::size_t kk = 0; kk < ks.size(); ++kk)
                    if (static_cast<std::size_t>(ks[kk]) == i + 1)
                        err_sum[kk] += std::abs(acc / static_cast<double>(i + 1) - truth[q]);
            }
        }
        double knn_err = 0.0;
        auto knn_sweep = ordered_json::object();
        for (std::size_t kk = 0; kk < ks.size(); ++kk) {
            const double err = err_sum[kk] / static_cast<double>(phases.size());
            knn_sweep["k" + std::to_string(ks[kk])] = err;
            if (ks[kk] == cfg.knn_k) knn_err = err;
        }
        row["knn_mean_abs"] = knn_err;
        row["knn_sweep"] = knn_sweep;
        row["matched_gp_mean_abs"] = matched_err;
        rows.push_back(row);

        if (matched_err < best_mismatched) ++matched_wins;
        if (matched_err <= knn_err) ++knn_wins;
    }
    result.details["knn_k"] = cfg.knn_k;
    result.details["matrix"] = rows;

    {
        std::ostringstream d;
        d << "matched model best on " << matched_wins << "/" << n_env << " environments";
        result.checks.push_back({"matched_beats_mismatched",
                                 matched_wins >= cfg.thresholds.matched_win_min_envs, d.str()});
    }
    {
        std::ostringstream d;
        d << "GP <= KNN(k=5) on " << knn_wins << "/" << n_env << " environments";
        result.checks.push_back({"gp_beats_knn", knn_wins >= cfg.thresholds.knn_win_min_envs,
                                 d.str()});
    }
    return result;
}

ExperimentResult exp_selection_trials(const BenchConfig& cfg, int trials) {
    ExperimentResult result;
    result.name = "selection_trials";
    result.seeds = {cfg.seed};
    if (trials < 1)
        throw ValidationError("exp_selection_trials: trials must be >= 1");

    const auto bundle = build_preset_bundle(cfg, std::min(cfg.cap, kSelectionCap));
    const auto n_env = bundle.specs.size();

    std::vector<std::vector<int>> confusion(n_env, std::vector<int>(n_env, 0));
    bool segmentation_exact = true;
    SelectOptions sel;
    sel.threads = cfg.threads;

    for (std::size_t e = 0; e < n_env; ++e) {
        const auto& test = bundle.test_sets[e];
        std::vector<std::size_t> indices(test.size());
        for (int trial = 0; trial < trials; ++trial) {
            NoiseStream rng(cfg.seed ^ (0xC1A55ull + e * 1000003ull + static_cast<std::uint64_t>(trial)));
            for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
            const auto k = std::min<std::size_t>(kSelectionSubset, indices.size());
            Eigen::VectorXd x(static_cast<Eigen::Index>(k));
            Eigen::VectorXd y(static_cast<Eigen::Index>(k));
            for (std::size_t i = 0; i < k; ++i) {
                const auto pick = i + static_cast<std::size_t>(
                                          rng.uniform() * static_cast<double>(indices.size() - i));
                std::swap(indices[i], indices[std::min(pick, indices.size() - 1)]);
                const auto& s = test.samples[indices[i]];
                x[static_cast<Eigen::Index>(i)] = s.delta_phi;
                y[static_cast<Eigen::Index>(i)] = s.true_distance;
            }
            const auto report = select_model(bundle.dict, x, y, sel);
            ++confusion[e][report.chosen_index];
            const auto& seg = report.input_segmentation;
            if (seg.count_sum() != static_cast<std::int64_t>(k) ||
                std::abs(seg.percentage_sum() - 100.0) > 1e-9)
                segmentation_exact = false;
        }
    }

    auto conf_json = ordered_json::object();
    auto acc_json = ordered_json::object();
    std::vector<double> accuracy(n_env);
    for (std::size_t e = 0; e < n_env; ++e) {
        auto row = ordered_json::object();
        for (std::size_t m = 0; m < n_env; ++m) row[bundle.specs[m].id] = confusion[e][m];
        conf_json[bundle.specs[e].id] = row;
        accuracy[e] = static_cast<double>(confusion[e][e]) / static_cast<double>(trials);
        acc_json[bundle.specs[e].id] = accuracy[e];
    }
    result.details["trials_per_env"] = trials;
    result.details["subset_size"] = kSelectionSubset;
    result.details["training_cap"] = std::min(cfg.cap, kSelectionCap);
    result.details["confusion"] = conf_json;
    result.details["accuracy"] = acc_json;

    for (const auto& id : dissimilar_preset_ids()) {
        for (std::size_t e = 0; e < n_env; ++e) {
            if (bundle.specs[e].id != id) continue;
            std::ostringstream d;
            d << "accuracy " << accuracy[e] << " over " << trials << " trials";
            result.checks.push_back({"accuracy_" + id,
                                     accuracy[e] >= cfg.thresholds.selection_accuracy_min, d.str()});
        }
    }
    result.checks.push_back({"segmentation_partition_exact", segmentation_exact,
                             "segment counts partition every subset; percentages sum to 100"});

    // designed-similar pair: reported, never asserted
    const auto& [sim_a, sim_b] = similar_preset_pair();
    for (std::size_t e = 0; e < n_env; ++e) {
        if (bundle.specs[e].id != sim_a && bundle.specs[e].id != sim_b) continue;
        result.details["similar_pair_note_" + bundle.specs[e].id] =
            "accuracy " + format_double(accuracy[e]) + " (confusable with its designed twin)";
    }
    return result;
}

ExperimentResult exp_multitag_drift(const BenchConfig& cfg) {
    ExperimentResult result;
    result.name = "multitag_drift";
    result.seeds = {cfg.seed};

    const auto presets = load_presets(cfg.preset_dir);
    const auto spec_a = preset_by_id(presets, "env-a");
    const auto spec_b = preset_by_id(presets, "env-b");

    ModelDictionary dict;
    KernelConfig kernel;
    for (const auto& spec : {spec_a, spec_b}) {
        const auto ds = generate_for(spec, cfg);
        auto [train, test] = split_dataset(ds, kSplitFraction, spec.seed ^ 0x5eedULL ^ cfg.seed);
        dict.models.push_back(GpEnvironmentModel::train(train, kernel, cfg.cap, dict.thresholds));
    }

    // the same environment months later: fresh noise, more of it, one new
    // obstruction
    EnvironmentSpec drifted = spec_a;
    drifted.id = "env-a-drifted";
    drifted.seed = spec_a.seed + cfg.seed + 9999;
    drifted.noise_sigma_rad *= 1.15;
    drifted.spike_rate = std::min(1.0, drifted.spike_rate * 1.25);
    drifted.dead_zones.push_back({9.2, 9.6, -30.0, 30.0});

    LocalizeOptions opt;
    opt.threads = cfg.threads;

    auto rows = ordered_json::array();
    double z_matched = 0.0, mt_kin_matched = 0.0;
    for (const auto& model_id : {std::string("env-a"), std::string("env-b")}) {
        opt.force_env = model_id;
        const auto st_tags = make_tag_tracks(1, cfg.seed + 21, kTrackDuration);
        const auto st_stream = simulate_track(drifted, st_tags[0]);
        const auto st = localize_stream(dict, st_stream, opt);

        const auto mt_tags = make_tag_tracks(8, cfg.seed + 22, kTrackDuration);
        const auto mt_stream = simulate_multi_tag_stream(drifted, mt_tags);
        const auto mt = localize_stream(dict, mt_stream, opt);

        // z of the multi-tag mean against the single-tag error distribution
        const auto& st_track = st.tracks.front();
        Eigen::VectorXd st_pred = Eigen::Map<const Eigen::VectorXd>(
            st_track.raw_ranges.data(), static_cast<Eigen::Index>(st_track.raw_ranges.size()));
        Eigen::VectorXd st_truth = Eigen::Map<const Eigen::VectorXd>(
            st_track.truth_ranges.data(), static_cast<Eigen::Index>(st_track.truth_ranges.size()));
        const auto st_stats = error_stats(st_pred, st_truth);
        const double z = st_stats.std_abs > 0.0
                             ? (mt.overall_raw->mean_abs - st_stats.mean_abs) / st_stats.std_abs
                             : 0.0;
        rows.push_back(ordered_json{{"model", model_id},
                                    {"mt_full_mean", mt.overall_raw->mean_abs},
                                    {"st_full_mean", st_stats.mean_abs},
                                    {"st_full_std", st_stats.std_abs},
                                    {"mt_z_score", z},
                                    {"mt_kin_mean", mt.overall_constrained->mean_abs},
                                    {"st_kin_mean", st.overall_constrained->mean_abs}});
        if (model_id == "env-a") {
            z_matched = z;
            mt_kin_matched = mt.overall_constrained->mean_abs;
        }
    }
    result.details["tags"] = 8;
    result.details["table"] = rows;

    {
        std::ostringstream d;
        d << "matched-model multi-tag z-score " << z_matched;
        result.checks.push_back(
            {"multitag_z_within_band", std::abs(z_matched) <= cfg.thresholds.multitag_z_max, d.str()});
    }
    {
        std::ostringstream d;
        d << "constrained multi-tag mean error " << mt_kin_matched << " m";
        result.checks.push_back({"multitag_constrained_submeter",
                                 mt_kin_matched < cfg.thresholds.constrained_mean_max_m, d.str()});
    }
    return result;
}

ExperimentResult exp_unseen_env(const BenchConfig& cfg) {
    ExperimentResult result;
    result.name = "unseen_env";
    result.seeds = {cfg.seed};

    const auto presets = load_presets(cfg.preset_dir);
    const auto unseen = load_presets(cfg.preset_dir / "unseen");
    if (unseen.empty())
        throw IoError("no unseen presets under " + (cfg.preset_dir / "unseen").string());

    ModelDictionary dict;
    KernelConfig kernel;
    for (const auto& id : {std::string("env-a"), std::string("env-b")}) {
        const auto spec = preset_by_id(presets, id);
        const auto ds = generate_for(spec, cfg);
        auto [train, test] = split_dataset(ds, kSplitFraction, spec.seed ^ 0x5eedULL ^ cfg.seed);
        dict.models.push_back(GpEnvironmentModel::train(train, kernel, cfg.cap, dict.thresholds));
    }

    LocalizeOptions opt;
    opt.threads = cfg.threads;

    double worst_full = 0.0, worst_kin = 0.0;
    auto rows = ordered_json::array();
    for (const auto& u : unseen) {
        EnvironmentSpec spec = u;
        spec.seed = u.seed + cfg.seed;
        const auto stream = simulate_multi_tag_stream(spec, make_tag_tracks(8, cfg.seed + 31, kTrackDuration));
        ordered_json row;
        row["env"] = u.id;
        for (const auto& model_id : {std::string("env-a"), std::string("env-b")}) {
            opt.force_env = model_id;
            const auto res = localize_stream(dict, stream, opt);
            row[model_id + "_full_mean"] = res.overall_raw->mean_abs;
            row[model_id + "_kin_mean"] = res.overall_constrained->mean_abs;
            worst_full = std::max(worst_full, res.overall_raw->mean_abs);
            worst_kin = std::max(worst_kin, res.overall_constrained->mean_abs);
        }
        rows.push_back(row);
    }
    result.details["table"] = rows;

    {
        std::ostringstream d;
        d << "worst constrained mean error " << worst_kin << " m";
        result.checks.push_back({"unseen_constrained_lt_1m",
                                 worst_kin < cfg.thresholds.constrained_mean_max_m, d.str()});
    }
    {
        std::ostringstream d;
        d << "worst full-data mean error " << worst_full << " m";
        result.checks.push_back({"unseen_full_lt_envelope",
                                 worst_full < cfg.thresholds.unseen_full_mean_max_m, d.str()});
    }
    return result;
}

ExperimentResult exp_throughput(const BenchConfig& cfg) {
    ExperimentResult result;
    result.name = "throughput";
    result.seeds = {cfg.seed};

    const auto bundle = build_preset_bundle(cfg, cfg.cap);
    const auto presets = load_presets(cfg.preset_dir);
    const auto spec = preset_by_id(presets, "env-a");
    EnvironmentSpec stream_spec = spec;
    stream_spec.seed = spec.seed + cfg.seed + 4242;

    constexpr std::size_t n_tags = 32;
    auto tags = make_tag_tracks(n_tags, cfg.seed + 41, 60.0);
    const auto stream = simulate_multi_tag_stream(stream_spec, tags);

    LocalizeOptions opt;
    opt.threads = cfg.threads;

    const auto start = std::chrono::steady_clock::now();
    const auto res = localize_stream(bundle.dict, stream, opt);
    const auto stop = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(stop - start).count();
    const double per_min = static_cast<double>(res.tracks.size()) / (elapsed / 60.0);

    result.details["tags"] = res.tracks.size();
    result.details["stream_samples"] = stream.size();
    result.details["dictionary_models"] = bundle.dict.models.size();
    result.details["note"] = "measured rate lives in timing.txt";
    result.timing = ordered_json{{"elapsed_seconds", elapsed}, {"tags_per_minute", per_min}};

    std::ostringstream d;
    d << per_min << " tags/minute (" << res.tracks.size() << " tags in " << elapsed << " s)";
    result.checks.push_back(
        {"throughput_floor", per_min >= cfg.thresholds.throughput_min_tags_per_min, d.str()});
    return result;
}

} // namespace rfloc
