#include "rfloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rfloc/parallel.hpp"

namespace rfloc {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

Eigen::Vector2d polar_position(double range, double angle_deg) {
    const double a = angle_deg * kDegToRad;
    return {range * std::cos(a), range * std::sin(a)};
}

} // namespace

LocalizeResult localize_stream(const ModelDictionary& dict,
                               const std::vector<SignalSample>& stream,
                               const LocalizeOptions& options) {
    if (dict.models.empty())
        throw ValidationError("localize: empty dictionary");
    if (stream.empty())
        throw ValidationError("localize: empty stream");

    LocalizeResult result;

    const GpEnvironmentModel* model = nullptr;
    if (options.force_env) {
        model = dict.find(*options.force_env);
        if (!model)
            throw ValidationError("localize: no model '" + *options.force_env + "' in dictionary");
        result.selection_forced = true;
        result.selection.chosen_env_id = model->env_id();
    } else {
        Eigen::VectorXd x(static_cast<Eigen::Index>(stream.size()));
        bool all_labeled = true;
        for (std::size_t i = 0; i < stream.size(); ++i) {
            x[static_cast<Eigen::Index>(i)] = stream[i].delta_phi;
            all_labeled = all_labeled && stream[i].labeled();
        }
        std::optional<Eigen::VectorXd> hint;
        if (all_labeled) {
            Eigen::VectorXd y(x.size());
            for (std::size_t i = 0; i < stream.size(); ++i)
                y[static_cast<Eigen::Index>(i)] = stream[i].true_distance;
            hint = std::move(y);
        }
        SelectOptions sel = options.selection;
        sel.threads = options.threads;
        result.selection = select_model(dict, x, hint, sel);
        model = &dict.models[result.selection.chosen_index];
    }

    // group per tag; tags ordered by id for a stable output layout
    std::map<std::string, std::vector<const SignalSample*>> by_tag;
    for (const auto& s : stream) by_tag[s.tag_id].push_back(&s);

    std::vector<const std::vector<const SignalSample*>*> groups;
    std::vector<std::string> tag_ids;
    for (const auto& [id, g] : by_tag) {
        tag_ids.push_back(id);
        groups.push_back(&g);
    }

    result.tracks.resize(groups.size());
    std::vector<std::string> failures(groups.size());
    run_indexed(groups.size(), options.threads, [&](std::size_t gi) {
        try {
            const auto& g = *groups[gi];
            TagTrackEstimate track;
            track.tag_id = tag_ids[gi];
            track.times.reserve(g.size());
            Eigen::VectorXd x(static_cast<Eigen::Index>(g.size()));
            bool labeled = true;
            for (std::size_t i = 0; i < g.size(); ++i) {
                track.times.push_back(g[i]->t);
                x[static_cast<Eigen::Index>(i)] = g[i]->delta_phi;
                labeled = labeled && g[i]->labeled();
            }
            const Eigen::VectorXd raw = model->predict_mean(x);
            track.raw_ranges.assign(raw.begin(), raw.end());
            track.constrained_ranges =
                options.apply_constraint
                    ? kinematic_constrain(track.times, track.raw_ranges, options.kin_bound,
                                          std::nullopt, options.kin_per_second)
                    : track.raw_ranges;

            track.positions.reserve(g.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                track.positions.push_back(polar_position(track.constrained_ranges[i], g[i]->angle));

            if (labeled) {
                track.truth_ranges.reserve(g.size());
                track.truth_positions.reserve(g.size());
                for (const auto* s : g) {
                    track.truth_ranges.push_back(s->true_distance);
                    track.truth_positions.push_back(polar_position(s->true_distance, s->angle));
                }
                track.raw_metrics = evaluate_track(track.raw_ranges, track.truth_ranges);
                track.constrained_metrics =
                    evaluate_track(track.constrained_ranges, track.truth_ranges);
                track.position_metrics = evaluate_track(track.positions, track.truth_positions);
            }
            result.tracks[gi] = std::move(track);
        } catch (const std::exception& e) {
            failures[gi] = "tag '" + tag_ids[gi] + "': " + e.what();
        }
    });
    for (const auto& f : failures)
        if (!f.empty())
            throw NumericalError("localize: " + f);

    // pooled metrics over every labeled sample
    std::vector<double> raw_err, con_err;
    for (const auto& t : result.tracks) {
        if (t.truth_ranges.empty()) continue;
        for (std::size_t i = 0; i < t.truth_ranges.size(); ++i) {
            raw_err.push_back(std::abs(t.raw_ranges[i] - t.truth_ranges[i]));
            con_err.push_back(std::abs(t.constrained_ranges[i] - t.truth_ranges[i]));
        }
    }
    if (!raw_err.empty()) {
        TrackMetrics raw_m, con_m;
        double s1 = 0, s2 = 0, c1 = 0, c2 = 0;
        for (double e : raw_err) {
            s1 += e;
            s2 += e * e;
        }
        for (double e : con_err) {
            c1 += e;
            c2 += e * e;
        }
        const auto n = static_cast<double>(raw_err.size());
        raw_m.mean_abs = s1 / n;
        raw_m.rmse = std::sqrt(s2 / n);
        raw_m.p90 = percentile_linear(raw_err, 0.9);
        con_m.mean_abs = c1 / n;
        con_m.rmse = std::sqrt(c2 / n);
        con_m.p90 = percentile_linear(con_err, 0.9);
        result.overall_raw = raw_m;
        result.overall_constrained = con_m;
    }
    return result;
}

} // namespace rfloc
