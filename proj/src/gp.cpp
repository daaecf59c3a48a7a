#include "rfloc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rfloc {

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Matern15: return "matern15";
        case KernelKind::Matern25: return "matern25";
        case KernelKind::RationalQuadratic: return "rq";
    }
    return "rbf";
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "rbf") return KernelKind::Rbf;
    if (name == "matern15") return KernelKind::Matern15;
    if (name == "matern25") return KernelKind::Matern25;
    if (name == "rq") return KernelKind::RationalQuadratic;
    throw ValidationError("unknown kernel kind '" + name + "' (expected rbf|matern15|matern25|rq)");
}

Eigen::VectorXd phase_vector(const EnvironmentDataset& ds) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(ds.samples.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = ds.samples[static_cast<std::size_t>(i)].delta_phi;
    return x;
}

Eigen::VectorXd distance_vector(const EnvironmentDataset& ds) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(ds.samples.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const auto& s = ds.samples[static_cast<std::size_t>(i)];
        if (!s.labeled())
            throw ValidationError("distance_vector: dataset contains unlabeled samples");
        y[i] = s.true_distance;
    }
    return y;
}

MeanFunction fit_mean_function(const EnvironmentDataset& train,
                               const SegmentationThresholds& thresholds) {
    thresholds.validate();
    std::vector<double> xs, ys;
    for (const auto& s : train.samples) {
        if (!s.labeled()) continue;
        if (s.delta_phi < thresholds.phi_min || s.delta_phi > thresholds.phi_max) continue;
        xs.push_back(s.delta_phi);
        ys.push_back(s.true_distance);
    }
    if (xs.size() < 2)
        throw ValidationError("fit_mean_function: fewer than 2 samples inside the linear band");
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    if (*mn == *mx)
        throw ValidationError("fit_mean_function: need at least 2 distinct phase values in the linear band");

    const auto n = static_cast<double>(xs.size());
    const double xm = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - xm) * (xs[i] - xm);
        sxy += (xs[i] - xm) * (ys[i] - ym);
    }
    MeanFunction m;
    m.slope = sxy / sxx;
    m.intercept = ym - m.slope * xm;
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - m(xs[i]);
        ssr += r * r;
    }
    m.residual_std = xs.size() > 2 ? std::sqrt(ssr / (n - 2.0)) : 0.0;
    return m;
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// Attempts LLT with an increasing diagonal jitter ladder.
Eigen::LLT<Eigen::MatrixXd> chol_with_escalation(const Eigen::MatrixXd& a, double initial_jitter,
                                                 const char* what, double* jitter_out) {
    double ladder[] = {initial_jitter, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2};
    double tried = -1.0;
    for (double j : ladder) {
        if (j < initial_jitter || j <= tried) continue;
        tried = j;
        Eigen::MatrixXd b = a;
        b.diagonal().array() += j;
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        if (llt.info() == Eigen::Success) {
            if (jitter_out) *jitter_out = j;
            return llt;
        }
    }
    throw NumericalError(std::string(what) + ": Cholesky factorization failed for n=" +
                         std::to_string(a.rows()) +
                         " even with diagonal jitter up to 1e-2; matrix is numerically singular");
}

Eigen::MatrixXd kernel_matrix(const KernelConfig& cfg, const Eigen::VectorXd& x) {
    const auto n = x.size();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = kernel_eval(cfg, x[i], x[i]);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = kernel_eval(cfg, x[i], x[j]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

// Proportional per-bin quotas summing exactly to `want` (largest remainder).
std::vector<std::size_t> bin_quotas(const std::vector<std::size_t>& counts, std::size_t want,
                                    std::size_t total) {
    std::vector<std::size_t> quota(counts.size(), 0);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        const double exact = static_cast<double>(want) * static_cast<double>(counts[b]) /
                             static_cast<double>(total);
        quota[b] = static_cast<std::size_t>(exact);
        quota[b] = std::min(quota[b], counts[b]);
        assigned += quota[b];
        rema.push_back({exact - static_cast<double>(quota[b]), b});
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& l, const auto& r) { return l.first > r.first; });
    while (assigned < want) {
        bool progress = false;
        for (const auto& [frac, b] : rema) {
            if (assigned >= want) break;
            if (quota[b] < counts[b]) {
                ++quota[b];
                ++assigned;
                progress = true;
            }
        }
        if (!progress) break;
    }
    return quota;
}

} // namespace

GpEnvironmentModel GpEnvironmentModel::train(const EnvironmentDataset& train_data,
                                             const KernelConfig& cfg, std::size_t cap,
                                             const SegmentationThresholds& thresholds) {
    cfg.validate();
    thresholds.validate();
    if (train_data.empty())
        throw ValidationError("gp train: empty training dataset");
    if (cap < 2)
        throw ValidationError("gp train: cap must be >= 2");

    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < train_data.samples.size(); ++i)
        if (train_data.samples[i].labeled()) labeled.push_back(i);
    if (labeled.size() < 2)
        throw ValidationError("gp train: need at least 2 labeled samples");

    // Stratified subsample. The in-band backbone is stratified by distance
    // bin; phase outliers (outside the linear band) are kept at up to a
    // quarter of the cap with even phase coverage, so predictions at
    // disturbed phases rest on data instead of mean-function extrapolation.
    std::vector<std::size_t> chosen;
    if (labeled.size() <= cap) {
        chosen = labeled;
    } else {
        std::vector<std::size_t> in_band, out_band;
        for (std::size_t i : labeled) {
            const double phi = train_data.samples[i].delta_phi;
            (phi < thresholds.phi_min || phi > thresholds.phi_max ? out_band : in_band).push_back(i);
        }
        std::size_t out_take = std::min(out_band.size(), cap / 4);
        std::size_t in_take = std::min(in_band.size(), cap - out_take);
        out_take = std::min(out_band.size(), cap - in_take);

        if (out_take > 0) {
            std::stable_sort(out_band.begin(), out_band.end(), [&](std::size_t a, std::size_t b) {
                return train_data.samples[a].delta_phi < train_data.samples[b].delta_phi;
            });
            for (std::size_t i = 0; i < out_take; ++i)
                chosen.push_back(out_band[i * out_band.size() / out_take]);
        }
        if (in_take > 0 && !in_band.empty()) {
            double dmin = train_data.samples[in_band.front()].true_distance, dmax = dmin;
            for (std::size_t i : in_band) {
                dmin = std::min(dmin, train_data.samples[i].true_distance);
                dmax = std::max(dmax, train_data.samples[i].true_distance);
            }
            const std::size_t nbins = dmax > dmin ? 32 : 1;
            std::vector<std::vector<std::size_t>> bins(nbins);
            for (std::size_t i : in_band) {
                std::size_t b = 0;
                if (nbins > 1) {
                    const double f = (train_data.samples[i].true_distance - dmin) / (dmax - dmin);
                    b = std::min(nbins - 1, static_cast<std::size_t>(f * static_cast<double>(nbins)));
                }
                bins[b].push_back(i);
            }
            std::vector<std::size_t> counts(nbins);
            for (std::size_t b = 0; b < nbins; ++b) counts[b] = bins[b].size();
            const auto quota = bin_quotas(counts, in_take, in_band.size());
            for (std::size_t b = 0; b < nbins; ++b) {
                for (std::size_t i = 0; i < quota[b]; ++i)
                    chosen.push_back(bins[b][i * counts[b] / quota[b]]);
            }
        }
        std::sort(chosen.begin(), chosen.end());
    }

    EnvironmentDataset sub;
    sub.env_id = train_data.env_id;
    for (std::size_t i : chosen) sub.samples.push_back(train_data.samples[i]);

    MeanFunction mean;
    bool have_fit = false;
    try {
        mean = fit_mean_function(sub, thresholds);
        have_fit = mean.physical();
    } catch (const ValidationError&) {
        have_fit = false;
    }
    Eigen::VectorXd y = distance_vector(sub);
    if (!have_fit) {
        // constant-mean fallback at the training-output average
        mean.slope = 0.0;
        mean.intercept = y.mean();
        mean.residual_std = y.size() > 1 ? std::sqrt((y.array() - y.mean()).square().sum() /
                                                     static_cast<double>(y.size() - 1))
                                         : 0.0;
    }
    // the line is only trusted inside the calibrated band
    mean.band_lo = thresholds.phi_min;
    mean.band_hi = thresholds.phi_max;
    mean.out_of_band_value = y.mean();

    // the distribution vector describes the full training stream, not the
    // capped subsample
    EnvironmentDataset full_labeled;
    for (std::size_t i : labeled) full_labeled.samples.push_back(train_data.samples[i]);
    const auto v = segment(phase_vector(full_labeled), thresholds);

    return from_arrays(train_data.env_id, cfg, mean, thresholds, phase_vector(sub), std::move(y), v);
}

GpEnvironmentModel GpEnvironmentModel::from_arrays(std::string env_id, const KernelConfig& cfg,
                                                   const MeanFunction& mean,
                                                   const SegmentationThresholds& thresholds,
                                                   Eigen::VectorXd x_train,
                                                   Eigen::VectorXd y_train,
                                                   std::optional<SegmentationVector> segmentation) {
    cfg.validate();
    thresholds.validate();
    if (x_train.size() != y_train.size() || x_train.size() < 2)
        throw ValidationError("gp model: training arrays must have equal size >= 2");

    GpEnvironmentModel m;
    m.env_id_ = std::move(env_id);
    m.kernel_ = cfg;
    m.mean_ = mean;
    m.thresholds_ = thresholds;
    m.x_train_ = std::move(x_train);
    m.y_train_ = std::move(y_train);

    Eigen::MatrixXd k = kernel_matrix(cfg, m.x_train_);
    k.diagonal().array() += cfg.noise_variance;
    const auto llt = chol_with_escalation(k, cfg.jitter, "gp train", &m.jitter_used_);
    m.chol_lower_ = llt.matrixL();
    m.alpha_ = llt.solve(m.y_train_ - m.mean_(m.x_train_));
    m.segmentation_ = segmentation ? *segmentation : segment(m.x_train_, thresholds);
    if (!(m.segmentation_.v1 >= 0.0 && m.segmentation_.v2 >= 0.0 && m.segmentation_.v3 >= 0.0) ||
        std::abs(m.segmentation_.percentage_sum() - 100.0) > 1e-6)
        throw ValidationError("gp model: segmentation vector must be nonnegative and sum to 100");
    return m;
}

Eigen::MatrixXd GpEnvironmentModel::cross_kernel(
    const Eigen::Ref<const Eigen::VectorXd>& x_star) const {
    Eigen::MatrixXd k(x_star.size(), x_train_.size());
    for (Eigen::Index i = 0; i < x_star.size(); ++i)
        for (Eigen::Index j = 0; j < x_train_.size(); ++j)
            k(i, j) = kernel_eval(kernel_, x_star[i], x_train_[j]);
    return k;
}

Eigen::VectorXd GpEnvironmentModel::predict_mean(
    const Eigen::Ref<const Eigen::VectorXd>& x_star) const {
    if (x_star.size() == 0) return Eigen::VectorXd();
    return mean_(x_star) + cross_kernel(x_star) * alpha_;
}

Eigen::MatrixXd GpEnvironmentModel::predict_cov(
    const Eigen::Ref<const Eigen::VectorXd>& x_star) const {
    if (x_star.size() == 0) return Eigen::MatrixXd();
    const Eigen::MatrixXd ks = cross_kernel(x_star);
    Eigen::MatrixXd kss(x_star.size(), x_star.size());
    for (Eigen::Index i = 0; i < x_star.size(); ++i)
        for (Eigen::Index j = i; j < x_star.size(); ++j) {
            const double v = kernel_eval(kernel_, x_star[i], x_star[j]);
            kss(i, j) = v;
            kss(j, i) = v;
        }
    // chol_lower_ L:  K + sigma_n^2 I = L L^T;  solve via two triangular passes
    const Eigen::MatrixXd w =
        chol_lower_.triangularView<Eigen::Lower>().solve(ks.transpose());
    Eigen::MatrixXd cov = kss - w.transpose() * w;
    return 0.5 * (cov + cov.transpose());
}

double GpEnvironmentModel::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x_star,
                                          const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (x_star.size() < 1)
        throw ValidationError("gp log_likelihood: need at least one point");
    if (x_star.size() != y.size())
        throw ValidationError("gp log_likelihood: input/output size mismatch");

    Eigen::MatrixXd cov = predict_cov(x_star);
    cov.diagonal().array() += kernel_.noise_variance;
    const auto llt = chol_with_escalation(cov, kernel_.jitter, "gp log_likelihood", nullptr);

    const Eigen::VectorXd resid = y - predict_mean(x_star);
    const Eigen::MatrixXd l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double mahala = resid.dot(llt.solve(resid));
    const auto n = static_cast<double>(x_star.size());
    return -0.5 * n * kLogTwoPi - 0.5 * log_det - 0.5 * mahala;
}

} // namespace rfloc
