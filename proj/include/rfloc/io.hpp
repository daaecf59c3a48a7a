#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rfloc/dictionary.hpp"
#include "rfloc/gp.hpp"
#include "rfloc/types.hpp"

namespace rfloc {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// --- environment spec config (key = value) ---
EnvironmentSpec read_env_spec(const std::filesystem::path& path);
void write_env_spec(const std::filesystem::path& path, const EnvironmentSpec& spec);

// --- sample streams / datasets (CSV) ---
// header: tag_id,t,delta_phi,rssi,f1,f2,angle,true_distance
void write_samples_csv(const std::filesystem::path& path, const std::vector<SignalSample>& samples);
std::vector<SignalSample> read_samples_csv(const std::filesystem::path& path);

void write_dataset_csv(const std::filesystem::path& path, const EnvironmentDataset& ds);
EnvironmentDataset read_dataset_csv(const std::filesystem::path& path, std::string env_id = "");

// --- GP model (versioned JSON; factorization recomputed on load) ---
void save_model(const std::filesystem::path& path, const GpEnvironmentModel& model);
GpEnvironmentModel load_model(const std::filesystem::path& path);

// --- dictionary (directory: manifest.json + one model file per env) ---
void save_dictionary(const std::filesystem::path& dir, const ModelDictionary& dict);
ModelDictionary load_dictionary(const std::filesystem::path& dir);
/// Adds or replaces one model in a dictionary directory, creating it if
/// needed. Returns the updated dictionary.
ModelDictionary register_model(const std::filesystem::path& dir, const GpEnvironmentModel& model);

// --- selection report (JSON) ---
void write_selection_report(const std::filesystem::path& path, const SelectionReport& report);
SelectionReport read_selection_report(const std::filesystem::path& path);

// --- per-tag track (CSV) ---
// header: tag_id,t,raw_range,constrained_range,x,y
struct TrackRow {
    std::string tag_id;
    double t = 0.0;
    double raw_range = 0.0;
    double constrained_range = 0.0;
    double x = 0.0;
    double y = 0.0;
};
void write_track_csv(const std::filesystem::path& path, const std::vector<TrackRow>& rows);
std::vector<TrackRow> read_track_csv(const std::filesystem::path& path);

} // namespace rfloc
