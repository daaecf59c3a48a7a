#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rfloc/dictionary.hpp"
#include "rfloc/ranging.hpp"
#include "rfloc/types.hpp"

namespace rfloc {

struct LocalizeOptions {
    double kin_bound = 2.0;       // meters per update step
    bool kin_per_second = false;  // interpret kin_bound as m/s instead
    bool apply_constraint = true;
    std::optional<std::string> force_env; // skip model selection
    SelectOptions selection;
    int threads = 1;
};

/// Range and position series for one tag, plus error metrics when the
/// stream carried ground truth.
struct TagTrackEstimate {
    std::string tag_id;
    std::vector<double> times;
    std::vector<double> raw_ranges;
    std::vector<double> constrained_ranges;
    std::vector<Eigen::Vector2d> positions; // reader-frame, from range + bearing
    std::vector<double> truth_ranges;       // empty when unlabeled
    std::vector<Eigen::Vector2d> truth_positions;
    std::optional<TrackMetrics> raw_metrics;
    std::optional<TrackMetrics> constrained_metrics;
    std::optional<TrackMetrics> position_metrics;
};

struct LocalizeResult {
    SelectionReport selection;
    bool selection_forced = false;
    std::vector<TagTrackEstimate> tracks;
    std::optional<TrackMetrics> overall_raw;         // pooled over all tags
    std::optional<TrackMetrics> overall_constrained;
};

/// Full single-reader pipeline: one environment model is selected for the
/// whole stream (weighted log-likelihood over the dictionary, truth-assisted
/// when every sample is labeled), per-tag ranges come from the chosen GP,
/// the kinematic clamp smooths them, and positions are placed in the reader
/// frame using each sample's bearing.
LocalizeResult localize_stream(const ModelDictionary& dict,
                               const std::vector<SignalSample>& stream,
                               const LocalizeOptions& options = {});

} // namespace rfloc
