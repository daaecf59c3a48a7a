#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rfloc/gp.hpp"
#include "rfloc/sim.hpp"

using namespace rfloc;

namespace {

constexpr double kSlope1MHz = 299792458.0 / (4.0 * M_PI * 1e6); // ~23.86 m/rad

EnvironmentDataset line_dataset(const std::vector<double>& phases, double slope, double intercept) {
    EnvironmentDataset ds;
    ds.env_id = "line";
    double t = 0.0;
    for (double x : phases) {
        SignalSample s;
        s.tag_id = "tag-0";
        s.t = t;
        t += 0.02;
        s.delta_phi = x;
        s.f1 = kDefaultF1Hz;
        s.f2 = kDefaultF2Hz;
        s.true_distance = slope * x + intercept;
        ds.samples.push_back(s);
    }
    return ds;
}

// dense explicit-inverse evaluation of the posterior; the reference the
// factorized path must agree with
struct DenseOracle {
    KernelConfig cfg;
    MeanFunction mean;
    Eigen::VectorXd x, y;
    Eigen::MatrixXd k_inv;

    DenseOracle(const GpEnvironmentModel& model) {
        cfg = model.kernel();
        mean = model.mean();
        x = model.x_train();
        y = model.y_train();
        Eigen::MatrixXd k(x.size(), x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            for (Eigen::Index j = 0; j < x.size(); ++j) k(i, j) = kernel_eval(cfg, x[i], x[j]);
        k.diagonal().array() += cfg.noise_variance + model.jitter_used();
        k_inv = k.inverse();
    }

    Eigen::MatrixXd cross(const Eigen::VectorXd& xs) const {
        Eigen::MatrixXd ks(xs.size(), x.size());
        for (Eigen::Index i = 0; i < xs.size(); ++i)
            for (Eigen::Index j = 0; j < x.size(); ++j) ks(i, j) = kernel_eval(cfg, xs[i], x[j]);
        return ks;
    }

    Eigen::VectorXd mean_at(const Eigen::VectorXd& xs) const {
        return mean(xs) + cross(xs) * (k_inv * (y - mean(x)));
    }

    Eigen::MatrixXd cov_at(const Eigen::VectorXd& xs) const {
        Eigen::MatrixXd kss(xs.size(), xs.size());
        for (Eigen::Index i = 0; i < xs.size(); ++i)
            for (Eigen::Index j = 0; j < xs.size(); ++j) kss(i, j) = kernel_eval(cfg, xs[i], xs[j]);
        const Eigen::MatrixXd ks = cross(xs);
        return kss - ks * k_inv * ks.transpose();
    }

    double loglik_at(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) const {
        Eigen::MatrixXd cov = cov_at(xs);
        cov.diagonal().array() += cfg.noise_variance;
        const Eigen::VectorXd r = ys - mean_at(xs);
        const double quad = r.dot(cov.inverse() * r);
        const double logdet = std::log(cov.determinant());
        const auto n = static_cast<double>(xs.size());
        return -0.5 * n * std::log(2.0 * M_PI) - 0.5 * logdet - 0.5 * quad;
    }
};

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double rel_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

} // namespace

TEST_CASE("kernel closed forms") {
    KernelConfig cfg;
    cfg.length_scale = 0.0075;

    CHECK(kernel_eval(cfg, 0.4, 0.4) == doctest::Approx(1.0));
    CHECK(kernel_eval(cfg, 0.1, 0.1 + 0.0075) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

    // monotone decay toward zero
    double prev = 1.0;
    for (double gap = 0.002; gap < 0.2; gap *= 2) {
        const double v = kernel_eval(cfg, 0.0, gap);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(kernel_eval(cfg, 0.0, 5.0) < 1e-12);

    cfg.kind = KernelKind::Matern15;
    const double s3 = std::sqrt(3.0);
    CHECK(kernel_eval(cfg, 0.0, 0.0075) == doctest::Approx((1 + s3) * std::exp(-s3)).epsilon(1e-12));

    cfg.kind = KernelKind::Matern25;
    const double s5 = std::sqrt(5.0);
    CHECK(kernel_eval(cfg, 0.0, 0.0075) ==
          doctest::Approx((1 + s5 + 5.0 / 3.0) * std::exp(-s5)).epsilon(1e-12));

    cfg.kind = KernelKind::RationalQuadratic;
    cfg.rq_alpha = 1.0;
    CHECK(kernel_eval(cfg, 0.0, 0.0075) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("kernels are translation invariant") {
    NoiseStream rng(11);
    for (auto kind : {KernelKind::Rbf, KernelKind::Matern15, KernelKind::Matern25,
                      KernelKind::RationalQuadratic}) {
        KernelConfig cfg;
        cfg.kind = kind;
        cfg.length_scale = 0.05;
        for (int i = 0; i < 200; ++i) {
            const double x1 = rng.uniform() * 2.0;
            const double x2 = rng.uniform() * 2.0;
            const double c = (rng.uniform() - 0.5) * 20.0;
            CHECK(kernel_eval(cfg, x1 + c, x2 + c) ==
                  doctest::Approx(kernel_eval(cfg, x1, x2)).epsilon(1e-9));
        }
    }
}

TEST_CASE("mean function fit recovers exact lines") {
    // noiseless ideal line at 1 MHz spacing
    std::vector<double> phases;
    for (double x = 0.21; x <= 0.76; x += 0.01) phases.push_back(x);
    const auto ds = line_dataset(phases, kSlope1MHz, 0.0);
    const auto mean = fit_mean_function(ds);
    CHECK(mean.slope == doctest::Approx(kSlope1MHz).epsilon(1e-9));
    CHECK(mean.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK(mean.residual_std < 1e-9);
    CHECK(mean.physical());

    // two-point line
    const auto two = fit_mean_function(line_dataset({0.2, 1.2}, 24.0, 0.2));
    CHECK(two.slope == doctest::Approx(24.0).epsilon(1e-12));
    CHECK(two.intercept == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("mean function degenerate cases") {
    // constant distance, varying phase: slope 0, flagged non-physical
    EnvironmentDataset flat;
    for (double x : {0.3, 0.5, 0.7, 0.9}) {
        SignalSample s;
        s.tag_id = "tag-0";
        s.delta_phi = x;
        s.f1 = kDefaultF1Hz;
        s.f2 = kDefaultF2Hz;
        s.true_distance = 8.0;
        flat.samples.push_back(s);
    }
    const auto mean = fit_mean_function(flat);
    CHECK(mean.slope == doctest::Approx(0.0));
    CHECK(!mean.physical());

    // everything outside the linear band
    CHECK_THROWS_AS((void)fit_mean_function(line_dataset({1.5, 1.7, 1.9}, 24.0, 0.0)),
                    ValidationError);
    // a single in-band value
    CHECK_THROWS_AS((void)fit_mean_function(line_dataset({0.5, 0.5, 1.9}, 24.0, 0.0)),
                    ValidationError);
}

TEST_CASE("training interpolates noiseless data") {
    KernelConfig cfg;
    cfg.noise_variance = 1e-6;
    const auto ds = line_dataset({0.3, 0.5, 0.7}, 24.0, 0.0);
    const auto model = GpEnvironmentModel::train(ds, cfg, 100);
    const Eigen::VectorXd at_train = model.predict_mean(model.x_train());
    for (Eigen::Index i = 0; i < at_train.size(); ++i)
        CHECK(at_train[i] == doctest::Approx(model.y_train()[i]).epsilon(1e-3));
}

TEST_CASE("training cap is exact and stratified") {
    EnvironmentSpec spec;
    spec.id = "cap-env";
    spec.noise_sigma_rad = 0.01;
    spec.seed = 5;
    const auto ds = generate_dataset(spec, default_grid(), 200, 50.0); // 27000 samples
    KernelConfig cfg;
    const auto model = GpEnvironmentModel::train(ds, cfg, 500);
    CHECK(model.x_train().size() == 500);
    // subsample spans the full distance range
    CHECK(model.y_train().minCoeff() == doctest::Approx(5.0).epsilon(0.02));
    CHECK(model.y_train().maxCoeff() == doctest::Approx(18.0).epsilon(0.02));
}

TEST_CASE("duplicated inputs with zero noise exercise jitter escalation") {
    EnvironmentDataset ds;
    for (int i = 0; i < 4; ++i) {
        SignalSample s;
        s.tag_id = "tag-0";
        s.delta_phi = 0.5; // all identical
        s.f1 = kDefaultF1Hz;
        s.f2 = kDefaultF2Hz;
        s.true_distance = 10.0 + 0.1 * i;
        ds.samples.push_back(s);
    }
    KernelConfig cfg;
    cfg.noise_variance = 0.0;
    const auto model = GpEnvironmentModel::train(ds, cfg, 10);
    CHECK(model.jitter_used() > 0.0);
    CHECK(model.chol_lower().allFinite());
}

TEST_CASE("cholesky factor reconstructs the training matrix") {
    const auto ds = line_dataset({0.25, 0.4, 0.55, 0.7, 0.85, 1.0}, 23.0, 0.5);
    KernelConfig cfg;
    cfg.noise_variance = 0.1;
    const auto model = GpEnvironmentModel::train(ds, cfg, 100);

    Eigen::MatrixXd k(model.x_train().size(), model.x_train().size());
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j)
            k(i, j) = kernel_eval(cfg, model.x_train()[i], model.x_train()[j]);
    k.diagonal().array() += cfg.noise_variance + model.jitter_used();
    const Eigen::MatrixXd recon =
        model.chol_lower() * model.chol_lower().transpose();
    CHECK((recon - k).norm() / k.norm() < 1e-8);
}

TEST_CASE("posterior mean interpolates and reverts to the prior mean") {
    const auto ds = line_dataset({0.3, 0.45, 0.6, 0.75, 0.9}, 24.0, 0.0);
    KernelConfig cfg;
    cfg.noise_variance = 1e-12;
    const auto model = GpEnvironmentModel::train(ds, cfg, 100);

    // at training inputs: training outputs
    const Eigen::VectorXd at_train = model.predict_mean(model.x_train());
    for (Eigen::Index i = 0; i < at_train.size(); ++i)
        CHECK(at_train[i] == doctest::Approx(model.y_train()[i]).epsilon(1e-6));

    // far away: the kernel column vanishes, prediction falls back to m(x)
    Eigen::VectorXd far(1);
    far << 5.0;
    CHECK(model.predict_mean(far)[0] == doctest::Approx(model.mean()(5.0)).epsilon(1e-6));

    // empty input: empty output, not an error
    CHECK(model.predict_mean(Eigen::VectorXd()).size() == 0);
}

TEST_CASE("posterior covariance: no uncertainty at data, prior far away") {
    const auto ds = line_dataset({0.3, 0.5, 0.7}, 24.0, 0.0);
    KernelConfig cfg;
    cfg.noise_variance = 1e-12;
    const auto model = GpEnvironmentModel::train(ds, cfg, 100);

    Eigen::VectorXd at(1);
    at << 0.5;
    CHECK(model.predict_cov(at)(0, 0) <= 1e-6);

    Eigen::VectorXd far(1);
    far << 7.0;
    CHECK(model.predict_cov(far)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("posterior covariance is symmetric with near-nonnegative diagonal") {
    NoiseStream rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd x(12), y(12);
        for (Eigen::Index i = 0; i < 12; ++i) {
            x[i] = rng.uniform() * 1.5;
            y[i] = rng.gaussian(5.0) + 10.0;
        }
        KernelConfig cfg;
        cfg.length_scale = 0.05 + rng.uniform() * 0.2;
        cfg.noise_variance = 0.01;
        const auto model =
            GpEnvironmentModel::from_arrays("sym", cfg, MeanFunction{}, {}, x, y);
        Eigen::VectorXd xs(6);
        for (Eigen::Index i = 0; i < 6; ++i) xs[i] = rng.uniform() * 1.5;
        const Eigen::MatrixXd cov = model.predict_cov(xs);
        CHECK((cov - cov.transpose()).norm() < 1e-12);
        CHECK(cov.diagonal().minCoeff() > -1e-6);
    }
}

TEST_CASE("factorized path agrees with the dense oracle") {
    NoiseStream rng(17);
    const KernelKind kinds[] = {KernelKind::Rbf, KernelKind::Matern15, KernelKind::Matern25,
                                KernelKind::RationalQuadratic};
    for (int rep = 0; rep < 50; ++rep) {
        const auto n_train = 2 + static_cast<Eigen::Index>(rng.uniform() * 19);
        const auto n_test = 1 + static_cast<Eigen::Index>(rng.uniform() * 8);
        Eigen::VectorXd x(n_train), y(n_train), xs(n_test), ys(n_test);
        for (Eigen::Index i = 0; i < n_train; ++i) {
            x[i] = rng.uniform() * 2.0;
            y[i] = rng.gaussian(4.0) + 12.0;
        }
        for (Eigen::Index i = 0; i < n_test; ++i) {
            xs[i] = rng.uniform() * 2.0;
            ys[i] = rng.gaussian(4.0) + 12.0;
        }
        KernelConfig cfg;
        cfg.kind = kinds[rep % 4];
        cfg.length_scale = 0.02 + rng.uniform() * 0.4;
        cfg.noise_variance = 1e-4 + rng.uniform();
        cfg.rq_alpha = 0.5 + rng.uniform() * 2.0;
        MeanFunction mean;
        mean.slope = rng.gaussian(10.0);
        mean.intercept = rng.gaussian(3.0);

        const auto model = GpEnvironmentModel::from_arrays("oracle", cfg, mean, {}, x, y);
        const DenseOracle oracle(model);

        CHECK(rel_gap(model.predict_mean(xs), oracle.mean_at(xs)) < 1e-9);
        CHECK(rel_gap(model.predict_cov(xs), oracle.cov_at(xs)) < 1e-9);
        CHECK(rel_gap(model.log_likelihood(xs, ys), oracle.loglik_at(xs, ys)) < 1e-9);
    }
}

TEST_CASE("log likelihood closed-form values") {
    // far from the data with unit prior variance and zero noise, the
    // predictive is N(m(x), 1)
    const auto ds = line_dataset({0.3, 0.4, 0.5}, 24.0, 0.0);
    KernelConfig cfg;
    cfg.noise_variance = 0.0;
    const auto model = GpEnvironmentModel::train(ds, cfg, 100);

    Eigen::VectorXd far(1);
    far << 9.0;
    Eigen::VectorXd match(1);
    match << model.mean()(9.0);
    CHECK(model.log_likelihood(far, match) == doctest::Approx(-0.9189385332).epsilon(1e-6));

    Eigen::VectorXd off(1);
    off << model.mean()(9.0) + 1.0;
    CHECK(model.log_likelihood(far, off) == doctest::Approx(-1.4189385332).epsilon(1e-6));

    // growing residuals strictly decrease the likelihood
    double prev = model.log_likelihood(far, match);
    for (double r = 0.5; r < 5.0; r += 0.5) {
        Eigen::VectorXd yy(1);
        yy << model.mean()(9.0) + r;
        const double ll = model.log_likelihood(far, yy);
        CHECK(ll < prev);
        prev = ll;
    }

    Eigen::VectorXd bad(2);
    bad << 1.0, 2.0;
    CHECK_THROWS_AS((void)model.log_likelihood(far, bad), ValidationError);
    CHECK_THROWS_AS((void)model.log_likelihood(Eigen::VectorXd(), Eigen::VectorXd()),
                    ValidationError);
}

TEST_CASE("interpolation limit as noise goes to zero") {
    const auto ds = line_dataset({0.25, 0.5, 0.75, 1.0}, 22.0, 1.0);
    for (double nv : {1e-2, 1e-4, 1e-6, 1e-8}) {
        KernelConfig cfg;
        cfg.noise_variance = nv;
        const auto model = GpEnvironmentModel::train(ds, cfg, 100);
        const Eigen::VectorXd at_train = model.predict_mean(model.x_train());
        const double worst = (at_train - model.y_train()).cwiseAbs().maxCoeff();
        CHECK(worst < 10.0 * std::sqrt(nv) + 1e-6);
    }
}

TEST_CASE("constant-mean fallback activates when the band fit fails") {
    // every phase outside the linear band: fit fails, constant mean kicks in
    EnvironmentDataset ds;
    for (double x : {1.5, 1.6, 1.7, 1.8}) {
        SignalSample s;
        s.tag_id = "tag-0";
        s.delta_phi = x;
        s.f1 = kDefaultF1Hz;
        s.f2 = kDefaultF2Hz;
        s.true_distance = 20.0 * x;
        ds.samples.push_back(s);
    }
    KernelConfig cfg;
    const auto model = GpEnvironmentModel::train(ds, cfg, 10);
    CHECK(model.mean().slope == 0.0);
    CHECK(model.mean().intercept == doctest::Approx(distance_vector(ds).mean()));
}
