#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rfloc/gp.hpp"
#include "rfloc/segmentation.hpp"

namespace rfloc {

/// Ordered set of per-environment GP models sharing one threshold pair.
struct ModelDictionary {
    std::vector<GpEnvironmentModel> models;
    SegmentationThresholds thresholds;

    void validate() const;
    const GpEnvironmentModel* find(const std::string& env_id) const;
};

/// Per-model outcome of one selection run.
struct ModelScore {
    std::string env_id;
    double weight = 0.0;         // ||v_l - v*||, clamped below by kWeightFloor
    double log_likelihood = 0.0; // -inf when evaluation failed
    double weighted_score = 0.0;
    bool failed = false;
};

struct SelectionReport {
    std::string chosen_env_id;
    std::size_t chosen_index = 0;
    SegmentationVector input_segmentation;
    std::vector<ModelScore> scores;
};

/// A perfect segmentation match must not zero out the likelihood term.
inline constexpr double kWeightFloor = 1e-9;

/// Segmentation-distance weights of every dictionary entry against v*.
std::vector<double> weights(const ModelDictionary& dict, const SegmentationVector& v_star);

struct SelectOptions {
    /// Likelihood evaluation runs on an even-stride digest of at most this
    /// many stream points; segmentation always uses the full stream.
    std::size_t likelihood_digest_cap = 256;
    int threads = 1;
};

/// Picks argmax_l  w_l * L_l  over the dictionary for an incoming phase
/// stream of at least 10 samples. With `y_hint` (ground-truth ranges,
/// aligned with x_star) the likelihood scores the hint under each model's
/// predictive distribution; without it each model is scored by the density
/// of its own predictions, which reduces to the predictive log-determinant
/// term and rates how tightly the model covers the stream. Ties break to
/// the lowest index.
SelectionReport select_model(const ModelDictionary& dict,
                             const Eigen::Ref<const Eigen::VectorXd>& x_star,
                             const std::optional<Eigen::VectorXd>& y_hint = std::nullopt,
                             const SelectOptions& options = {});

} // namespace rfloc
