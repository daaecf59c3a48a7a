#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfloc/dictionary.hpp"
#include "rfloc/types.hpp"

namespace rfloc {

/// Every pass/fail bound used by the experiment suite, in one place.
/// Values can be overridden from a key = value file.
struct BenchThresholds {
    double gp_oracle_rel_err = 1e-9;
    double gp_oracle_max_seconds = 10.0;
    double trilateration_tol_m = 1e-6;
    double trilateration_max_seconds = 5.0;
    int knn_win_min_envs = 5;            // GP <= KNN on at least this many of 6
    int matched_win_min_envs = 5;        // matched < mismatched on at least this many of 6
    int selection_trials = 100;
    double selection_accuracy_min = 0.90;
    double constrained_mean_max_m = 1.0;
    int constrained_submeter_min_envs = 4;
    double multitag_z_max = 1.0;
    double unseen_full_mean_max_m = 4.0;
    double throughput_min_tags_per_min = 30.0;
};

BenchThresholds load_bench_thresholds(const std::filesystem::path& path);

struct ExperimentCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::string name;
    std::vector<std::uint64_t> seeds;
    nlohmann::ordered_json details;
    std::vector<ExperimentCheck> checks;
    /// Wall-clock measurements, if any; kept out of to_json() so result
    /// files stay reproducible.
    nlohmann::ordered_json timing;

    bool passed() const;
    std::string summary() const;
    nlohmann::ordered_json to_json() const;
};

struct BenchConfig {
    std::filesystem::path preset_dir = "presets";
    std::uint64_t seed = 0; // shifts every derived RNG stream
    std::size_t cap = 2000;
    int knn_k = 5; // baseline k for the GP-vs-KNN comparison
    int threads = 1;
    BenchThresholds thresholds;
};

/// Presets trained on their own mapping runs, plus the held-out test splits
/// (aligned with dictionary order).
struct PresetBundle {
    std::vector<EnvironmentSpec> specs;
    ModelDictionary dict;
    std::vector<EnvironmentDataset> train_sets;
    std::vector<EnvironmentDataset> test_sets;
};

PresetBundle build_preset_bundle(const BenchConfig& cfg, std::size_t cap);

/// Kernel sweep on the env-d / env-f pair: correct- and incorrect-environment
/// RMSE per kernel.
ExperimentResult exp_kernel_table(const BenchConfig& cfg);

/// 6x6 model-choice matrix (GP mean error per test env x trained model) plus
/// the matched KNN baseline.
ExperimentResult exp_model_choice(const BenchConfig& cfg);

/// Seeded sparse-subset classification trials over the preset dictionary.
ExperimentResult exp_selection_trials(const BenchConfig& cfg, int trials);

/// 8-tag runs on a drifted variant of env-a vs the single-tag baseline.
ExperimentResult exp_multitag_drift(const BenchConfig& cfg);

/// Three never-trained environments evaluated under the two forest models.
ExperimentResult exp_unseen_env(const BenchConfig& cfg);

/// Tags-per-minute of the full localization pipeline (measured; timing goes
/// into ExperimentResult::timing).
ExperimentResult exp_throughput(const BenchConfig& cfg);

/// Writes result.json (+ summary.txt, + timing.txt when present) under
/// out_dir/<experiment name>/.
void write_experiment(const std::filesystem::path& out_dir, const ExperimentResult& result);

/// Preset ids designed to be mutually dissimilar (classification asserted)
/// and the designed-similar pair (confusion reported, not asserted).
const std::vector<std::string>& dissimilar_preset_ids();
const std::pair<std::string, std::string>& similar_preset_pair();

} // namespace rfloc
