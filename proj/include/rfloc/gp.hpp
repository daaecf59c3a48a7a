#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "rfloc/kernels.hpp"
#include "rfloc/segmentation.hpp"
#include "rfloc/types.hpp"

namespace rfloc {

/// Linear phase-to-distance prior: m(x) = slope * x + intercept.
/// The line is only calibrated inside the linear band; outside it the
/// function holds at `out_of_band_value` (the training-output average) so
/// that disturbed phases are not extrapolated to absurd distances. A NaN
/// out_of_band_value keeps the pure line everywhere.
/// slope <= 0 marks a fit that is not physically meaningful; training then
/// falls back to a constant mean at the training-output average.
struct MeanFunction {
    double slope = 0.0;        // m/rad
    double intercept = 0.0;    // m
    double residual_std = 0.0; // std of the fit residuals
    double band_lo = -std::numeric_limits<double>::infinity();
    double band_hi = std::numeric_limits<double>::infinity();
    double out_of_band_value = std::numeric_limits<double>::quiet_NaN();

    bool physical() const {
        return std::isfinite(slope) && std::isfinite(intercept) && slope > 0.0;
    }
    bool banded() const { return !std::isnan(out_of_band_value); }
    double operator()(double x) const {
        if (banded() && (x < band_lo || x > band_hi)) return out_of_band_value;
        return slope * x + intercept;
    }
    Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        Eigen::VectorXd out(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = (*this)(x[i]);
        return out;
    }
};

/// Ordinary least squares of distance on phase difference, restricted to the
/// linear band. Throws ValidationError when fewer than two distinct in-band
/// phase values exist.
MeanFunction fit_mean_function(const EnvironmentDataset& train,
                               const SegmentationThresholds& thresholds = {});

/// delta_phi column of a dataset.
Eigen::VectorXd phase_vector(const EnvironmentDataset& ds);
/// true_distance column; throws if any sample is unlabeled.
Eigen::VectorXd distance_vector(const EnvironmentDataset& ds);

/// Exact GP posterior over distance given phase-difference inputs.
///
/// Internals kept after construction: the lower Cholesky factor of
/// K(X,X) + sigma_n^2 I  and  alpha = (K + sigma_n^2 I)^-1 (Y - m(X)).
/// Instances are immutable; prediction and likelihood are const and safe to
/// call from many threads.
class GpEnvironmentModel {
public:
    /// Trains on a labeled dataset: stratified subsample to `cap` points,
    /// mean-function fit (with constant-mean fallback), factorization with
    /// jitter escalation, segmentation of the training inputs.
    static GpEnvironmentModel train(const EnvironmentDataset& train_data, const KernelConfig& cfg,
                                    std::size_t cap = kDefaultTrainingCap,
                                    const SegmentationThresholds& thresholds = {});

    /// Rebuilds a model from persisted arrays; the factorization is
    /// recomputed deterministically. `segmentation` is the training
    /// stream's distribution vector; when absent it is recomputed from
    /// x_train (adequate for uncapped models).
    static GpEnvironmentModel from_arrays(std::string env_id, const KernelConfig& cfg,
                                          const MeanFunction& mean,
                                          const SegmentationThresholds& thresholds,
                                          Eigen::VectorXd x_train, Eigen::VectorXd y_train,
                                          std::optional<SegmentationVector> segmentation = {});

    /// Posterior mean  m(X*) + K(X*, X) alpha.  Empty input -> empty output.
    Eigen::VectorXd predict_mean(const Eigen::Ref<const Eigen::VectorXd>& x_star) const;

    /// Posterior covariance
    ///   K(X*,X*) - K(X*,X) [K(X,X) + sigma_n^2 I]^-1 K(X,X*),
    /// symmetrized before returning.
    Eigen::MatrixXd predict_cov(const Eigen::Ref<const Eigen::VectorXd>& x_star) const;

    /// Gaussian log density of y under the posterior predictive at x_star
    /// with total covariance  predict_cov(x_star) + sigma_n^2 I.  Uses the
    /// Cholesky log-determinant throughout.
    double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x_star,
                          const Eigen::Ref<const Eigen::VectorXd>& y) const;

    const std::string& env_id() const { return env_id_; }
    const KernelConfig& kernel() const { return kernel_; }
    const MeanFunction& mean() const { return mean_; }
    const SegmentationThresholds& thresholds() const { return thresholds_; }
    const Eigen::VectorXd& x_train() const { return x_train_; }
    const Eigen::VectorXd& y_train() const { return y_train_; }
    const SegmentationVector& segmentation() const { return segmentation_; }
    const Eigen::MatrixXd& chol_lower() const { return chol_lower_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    double jitter_used() const { return jitter_used_; }

    static constexpr std::size_t kDefaultTrainingCap = 2000;

private:
    GpEnvironmentModel() = default;

    Eigen::MatrixXd cross_kernel(const Eigen::Ref<const Eigen::VectorXd>& x_star) const;

    std::string env_id_;
    KernelConfig kernel_;
    MeanFunction mean_;
    SegmentationThresholds thresholds_;
    Eigen::VectorXd x_train_;
    Eigen::VectorXd y_train_;
    Eigen::MatrixXd chol_lower_;
    Eigen::VectorXd alpha_;
    SegmentationVector segmentation_;
    double jitter_used_ = 0.0;
};

} // namespace rfloc
