#include "rfloc/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rfloc {

double knn_range(const EnvironmentDataset& train, double query_phi, std::size_t k) {
    if (train.empty())
        throw ValidationError("knn_range: empty training set");
    if (k < 1 || k > train.size())
        throw ValidationError("knn_range: k must be in [1, |train|]");

    thread_local std::vector<std::pair<double, std::size_t>> scratch;
    scratch.clear();
    scratch.reserve(train.size());
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
        const auto& s = train.samples[i];
        if (!s.labeled())
            throw ValidationError("knn_range: training set contains unlabeled samples");
        scratch.push_back({std::abs(s.delta_phi - query_phi), i});
    }
    // pair ordering is (|phase gap|, original index): ties go to earlier samples
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     scratch.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        sum += train.samples[scratch[i].second].true_distance;
    return sum / static_cast<double>(k);
}

std::vector<double> kinematic_constrain(const std::vector<double>& times,
                                        const std::vector<double>& raw_ranges, double bound,
                                        std::optional<double> init, bool per_second) {
    if (times.size() != raw_ranges.size())
        throw ValidationError("kinematic_constrain: times/ranges size mismatch");
    if (raw_ranges.empty()) return {};
    if (!(bound >= 0.0))
        throw ValidationError("kinematic_constrain: bound must be >= 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ValidationError("kinematic_constrain: timestamps must be strictly increasing");

    std::vector<double> out(raw_ranges.size());
    const double anchor = init.value_or(raw_ranges.front());
    // first sample has no dt; the raw bound applies as-is
    out[0] = std::clamp(raw_ranges[0], anchor - bound, anchor + bound);
    for (std::size_t i = 1; i < raw_ranges.size(); ++i) {
        const double step = per_second ? bound * (times[i] - times[i - 1]) : bound;
        out[i] = std::clamp(raw_ranges[i], out[i - 1] - step, out[i - 1] + step);
    }
    return out;
}

namespace {

double residual_norm2(const std::vector<Eigen::Vector2d>& anchors, const std::vector<double>& d,
                      const Eigen::Vector2d& x) {
    double c = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const double r = d[i] - (anchors[i] - x).norm();
        c += r * r;
    }
    return c;
}

} // namespace

Eigen::Vector2d solve_position(const std::vector<RangeObservation>& observations,
                               const std::vector<AntennaPose>& antennas,
                               std::optional<Eigen::Vector2d> prior) {
    if (observations.size() < 2)
        throw ValidationError("solve_position: need at least 2 range observations");

    std::map<std::string, Eigen::Vector2d> pose_by_id;
    for (const auto& a : antennas) {
        a.validate();
        pose_by_id[a.id] = a.position;
    }
    std::vector<Eigen::Vector2d> anchors;
    std::vector<double> ranges;
    for (const auto& o : observations) {
        o.validate();
        const auto it = pose_by_id.find(o.antenna_id);
        if (it == pose_by_id.end())
            throw ValidationError("solve_position: unknown antenna id '" + o.antenna_id + "'");
        anchors.push_back(it->second);
        ranges.push_back(o.range);
    }

    // Degenerate geometry: all observation anchors at one point.
    bool distinct = false;
    for (std::size_t i = 1; i < anchors.size() && !distinct; ++i)
        distinct = (anchors[i] - anchors[0]).norm() > 1e-12;
    if (!distinct)
        throw NumericalError("solve_position: degenerate geometry, all antennas coincident");

    Eigen::Vector2d x;
    bool have_init = false;
    if (prior) {
        x = *prior;
        have_init = true;
    } else if (anchors.size() >= 3) {
        // closed-form start: pairwise-differenced circle equations are linear
        const auto rows = static_cast<Eigen::Index>(anchors.size() - 1);
        Eigen::MatrixXd a(rows, 2);
        Eigen::VectorXd b(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& ai = anchors[static_cast<std::size_t>(i) + 1];
            a.row(i) = 2.0 * (ai - anchors[0]).transpose();
            b[i] = ai.squaredNorm() - anchors[0].squaredNorm() + ranges[0] * ranges[0] -
                   ranges[static_cast<std::size_t>(i) + 1] * ranges[static_cast<std::size_t>(i) + 1];
        }
        const auto qr = a.colPivHouseholderQr();
        if (qr.rank() == 2) {
            x = qr.solve(b);
            have_init = x.allFinite();
        }
    }
    if (!have_init) {
        // inverse-range-weighted centroid: nearer antennas pull harder
        double wsum = 0.0;
        x.setZero();
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            const double w = 1.0 / std::max(ranges[i], 1e-6);
            x += w * anchors[i];
            wsum += w;
        }
        x /= wsum;
    }

    // Levenberg-Marquardt damping: only improving steps are accepted, so the
    // returned point never scores worse than the start.
    const int max_iter = 100;
    const double step_tol = 1e-9;
    double cost = residual_norm2(anchors, ranges, x);
    double damping = 1e-6;
    bool converged = false;

    const auto n = static_cast<Eigen::Index>(anchors.size());
    Eigen::MatrixXd jac(n, 2);
    Eigen::VectorXd res(n);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            Eigen::Vector2d diff = x - anchors[idx];
            double dist = diff.norm();
            if (dist < 1e-12) { // sitting on an antenna: pick a direction
                diff = Eigen::Vector2d(1.0, 0.0);
                dist = 1e-12;
            }
            res[i] = ranges[idx] - dist;
            jac.row(i) = -diff.transpose() / dist;
        }
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d grad = jac.transpose() * res;
        if (cost == 0.0 || grad.norm() < 1e-12) {
            converged = true;
            break;
        }

        bool accepted = false;
        Eigen::Vector2d step = Eigen::Vector2d::Zero();
        while (damping < 1e12) {
            Eigen::Matrix2d lhs = jtj;
            lhs.diagonal().array() += damping;
            step = lhs.ldlt().solve(-grad);
            const Eigen::Vector2d cand = x + step;
            const double cand_cost = residual_norm2(anchors, ranges, cand);
            if (cand_cost < cost) {
                const double gain = cost - cand_cost;
                x = cand;
                cost = cand_cost;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                // stationary in practice once per-step gains hit noise level
                if (step.norm() < step_tol || gain <= 1e-11 * (1.0 + cost)) converged = true;
                break;
            }
            damping *= 10.0;
        }
        if (!accepted) {
            // no improving step at any damping: stationary point
            converged = true;
            break;
        }
        if (converged) break;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "solve_position: no convergence after " << max_iter << " iterations; last iterate ("
            << x.x() << ", " << x.y() << "), residual " << std::sqrt(cost);
        throw NumericalError(msg.str());
    }
    return x;
}

double percentile_linear(std::vector<double> values, double q) {
    if (values.empty())
        throw ValidationError("percentile_linear: empty input");
    if (!(q >= 0.0 && q <= 1.0))
        throw ValidationError("percentile_linear: q must be in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

TrackMetrics metrics_from_abs_errors(std::vector<double> err) {
    TrackMetrics m;
    double sum = 0.0, sum2 = 0.0;
    for (double e : err) {
        sum += e;
        sum2 += e * e;
    }
    const auto n = static_cast<double>(err.size());
    m.mean_abs = sum / n;
    m.rmse = std::sqrt(sum2 / n);
    m.p90 = percentile_linear(std::move(err), 0.9);
    return m;
}

} // namespace

TrackMetrics evaluate_track(const std::vector<double>& estimates,
                            const std::vector<double>& truth) {
    if (estimates.size() != truth.size())
        throw ValidationError("evaluate_track: estimate/truth length mismatch");
    if (estimates.empty())
        throw ValidationError("evaluate_track: empty track");
    std::vector<double> err(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i)
        err[i] = std::abs(estimates[i] - truth[i]);
    return metrics_from_abs_errors(std::move(err));
}

TrackMetrics evaluate_track(const std::vector<Eigen::Vector2d>& estimates,
                            const std::vector<Eigen::Vector2d>& truth) {
    if (estimates.size() != truth.size())
        throw ValidationError("evaluate_track: estimate/truth length mismatch");
    if (estimates.empty())
        throw ValidationError("evaluate_track: empty track");
    std::vector<double> err(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i)
        err[i] = (estimates[i] - truth[i]).norm();
    return metrics_from_abs_errors(std::move(err));
}

} // namespace rfloc
