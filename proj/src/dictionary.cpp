#include "rfloc/dictionary.hpp"

#include "rfloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <thread>

namespace rfloc {

SegmentationVector segment(const Eigen::Ref<const Eigen::VectorXd>& phases,
                           const SegmentationThresholds& thresholds) {
    thresholds.validate();
    if (phases.size() == 0)
        throw ValidationError("segment: empty input");

    SegmentationVector v;
    v.c1 = v.c2 = v.c3 = 0;
    for (Eigen::Index i = 0; i < phases.size(); ++i) {
        const double x = phases[i];
        if (x < thresholds.phi_min)
            ++v.c2;
        else if (x > thresholds.phi_max)
            ++v.c3;
        else
            ++v.c1; // boundaries count as in-band
    }
    const auto n = static_cast<double>(phases.size());
    v.v1 = 100.0 * static_cast<double>(v.c1) / n;
    v.v2 = 100.0 * static_cast<double>(v.c2) / n;
    v.v3 = 100.0 * static_cast<double>(v.c3) / n;
    return v;
}

double segmentation_distance(const SegmentationVector& a, const SegmentationVector& b) {
    const double d1 = a.v1 - b.v1;
    const double d2 = a.v2 - b.v2;
    const double d3 = a.v3 - b.v3;
    return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
}

void ModelDictionary::validate() const {
    thresholds.validate();
    std::set<std::string> ids;
    for (const auto& m : models) {
        if (!ids.insert(m.env_id()).second)
            throw ValidationError("dictionary: duplicate env_id '" + m.env_id() + "'");
        if (m.thresholds().phi_min != thresholds.phi_min ||
            m.thresholds().phi_max != thresholds.phi_max)
            throw ValidationError("dictionary: model '" + m.env_id() +
                                  "' was segmented under different thresholds");
    }
}

const GpEnvironmentModel* ModelDictionary::find(const std::string& env_id) const {
    for (const auto& m : models)
        if (m.env_id() == env_id) return &m;
    return nullptr;
}

std::vector<double> weights(const ModelDictionary& dict, const SegmentationVector& v_star) {
    if (dict.models.empty())
        throw ValidationError("weights: empty dictionary");
    std::vector<double> w;
    w.reserve(dict.models.size());
    for (const auto& m : dict.models)
        w.push_back(std::max(segmentation_distance(m.segmentation(), v_star), kWeightFloor));
    return w;
}

void run_indexed(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const auto nt = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    for (std::size_t w = 0; w < nt; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < count; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

namespace {

// Likelihood digest: an even stride over the in-band samples (every model is
// calibrated there; out-of-band mass is already captured by the segmentation
// weights). Falls back to the whole stream when fewer than 10 samples sit
// inside the band.
std::vector<Eigen::Index> stride_digest(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const SegmentationThresholds& thresholds,
                                        std::size_t cap) {
    std::vector<Eigen::Index> pool;
    pool.reserve(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] >= thresholds.phi_min && x[i] <= thresholds.phi_max) pool.push_back(i);
    if (pool.size() < 10) {
        pool.resize(static_cast<std::size_t>(x.size()));
        for (Eigen::Index i = 0; i < x.size(); ++i) pool[static_cast<std::size_t>(i)] = i;
    }
    const auto want = std::min(cap, pool.size());
    std::vector<Eigen::Index> idx;
    idx.reserve(want);
    for (std::size_t i = 0; i < want; ++i) idx.push_back(pool[i * pool.size() / want]);
    return idx;
}

} // namespace

SelectionReport select_model(const ModelDictionary& dict,
                             const Eigen::Ref<const Eigen::VectorXd>& x_star,
                             const std::optional<Eigen::VectorXd>& y_hint,
                             const SelectOptions& options) {
    if (dict.models.empty())
        throw ValidationError("select_model: empty dictionary");
    dict.validate();
    if (x_star.size() < 10)
        throw ValidationError("select_model: stream must contain at least 10 samples");
    if (y_hint && y_hint->size() != x_star.size())
        throw ValidationError("select_model: y_hint length must match the stream");

    SelectionReport report;
    report.input_segmentation = segment(x_star, dict.thresholds);

    const auto digest = stride_digest(x_star, dict.thresholds, options.likelihood_digest_cap);
    Eigen::VectorXd xd(static_cast<Eigen::Index>(digest.size()));
    Eigen::VectorXd yd;
    if (y_hint) yd.resize(static_cast<Eigen::Index>(digest.size()));
    for (std::size_t i = 0; i < digest.size(); ++i) {
        xd[static_cast<Eigen::Index>(i)] = x_star[digest[i]];
        if (y_hint) yd[static_cast<Eigen::Index>(i)] = (*y_hint)[digest[i]];
    }

    const auto w = weights(dict, report.input_segmentation);
    report.scores.resize(dict.models.size());
    run_indexed(dict.models.size(), options.threads, [&](std::size_t i) {
        const auto& model = dict.models[i];
        ModelScore score;
        score.env_id = model.env_id();
        score.weight = w[i];
        try {
            const Eigen::VectorXd target = y_hint ? yd : model.predict_mean(xd);
            score.log_likelihood = model.log_likelihood(xd, target);
            score.weighted_score = score.weight * score.log_likelihood;
            if (std::isnan(score.weighted_score)) throw NumericalError("NaN score");
        } catch (const std::exception&) {
            score.failed = true;
            score.log_likelihood = -std::numeric_limits<double>::infinity();
            score.weighted_score = -std::numeric_limits<double>::infinity();
        }
        report.scores[i] = std::move(score);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < report.scores.size(); ++i)
        if (report.scores[i].weighted_score > report.scores[best].weighted_score) best = i;
    report.chosen_index = best;
    report.chosen_env_id = report.scores[best].env_id;
    return report;
}

} // namespace rfloc
