// rfloc: phase-difference RFID ranging with per-environment GP models.
//
// subcommands:
//   simulate   generate a labeled dataset from an environment spec
//   train      fit a GP range model and store it (optionally in a dictionary)
//   classify   pick the best-matching environment for a sample stream
//   localize   full pipeline: select model, predict ranges, constrain, place
//   bench      seeded experiment suite over the shipped presets

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include <json.hpp>

#include "rfloc/bench.hpp"
#include "rfloc/dictionary.hpp"
#include "rfloc/gp.hpp"
#include "rfloc/io.hpp"
#include "rfloc/pipeline.hpp"
#include "rfloc/presets.hpp"
#include "rfloc/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rfloc;

namespace {

struct SimulateArgs {
    std::string spec_path, out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t samples = 200;
    double rate = 50.0;
    double d_min = 5.0, d_max = 18.0, d_step = 0.5;
    double angle_min = -30.0, angle_max = 30.0, angle_step = 15.0;
};

void cmd_simulate(const SimulateArgs& a) {
    EnvironmentSpec spec = read_env_spec(a.spec_path);
    if (a.seed_given) spec.seed = a.seed;

    SamplingGrid grid;
    for (double d = a.d_min; d <= a.d_max + 1e-9; d += a.d_step) grid.distances_m.push_back(d);
    for (double ang = a.angle_min; ang <= a.angle_max + 1e-9; ang += a.angle_step)
        grid.angles_deg.push_back(ang);

    const auto ds = generate_dataset(spec, grid, a.samples, a.rate);
    write_dataset_csv(a.out_path, ds);

    std::map<std::pair<double, double>, std::size_t> per_position;
    for (const auto& s : ds.samples) ++per_position[{s.true_distance, s.angle}];
    std::cout << "environment " << spec.id << ": " << ds.size() << " samples over "
              << per_position.size() << " of " << grid.positions() << " grid positions\n";
    for (const auto& [pos, count] : per_position)
        std::cout << "  d=" << pos.first << " angle=" << pos.second << ": " << count << "\n";
    const auto dead = grid.positions() - per_position.size();
    if (dead > 0) std::cout << "  (" << dead << " positions inside dead zones: no reads)\n";
    std::cout << "wrote " << a.out_path << "\n";
}

struct TrainArgs {
    std::string in_path, out_path, dict_path, env_id;
    std::string kernel = "rbf";
    double length_scale = 0.0075;
    double noise_var = 0.25;
    double jitter = 0.0;
    double rq_alpha = 0.25;
    std::size_t cap = GpEnvironmentModel::kDefaultTrainingCap;
    double phi_min = 0.2, phi_max = 1.2;
};

void cmd_train(const TrainArgs& a) {
    if (a.out_path.empty() && a.dict_path.empty())
        throw ValidationError("train: need --out and/or --dict");
    const auto ds = read_dataset_csv(a.in_path, a.env_id);

    KernelConfig kernel;
    kernel.kind = kernel_kind_from_string(a.kernel);
    kernel.length_scale = a.length_scale;
    kernel.noise_variance = a.noise_var;
    kernel.jitter = a.jitter;
    kernel.rq_alpha = a.rq_alpha;
    const SegmentationThresholds thresholds{a.phi_min, a.phi_max};

    const auto model = GpEnvironmentModel::train(ds, kernel, a.cap, thresholds);
    if (!a.out_path.empty()) save_model(a.out_path, model);
    if (!a.dict_path.empty()) {
        const auto dict = register_model(a.dict_path, model);
        std::cout << "dictionary " << a.dict_path << " now lists " << dict.models.size()
                  << " environments\n";
    }

    const auto& v = model.segmentation();
    std::cout << "trained " << model.env_id() << " (" << to_string(kernel.kind) << ", "
              << model.x_train().size() << " points)\n"
              << "  mean fn: slope " << model.mean().slope << " m/rad, intercept "
              << model.mean().intercept << " m, residual std " << model.mean().residual_std << " m\n"
              << "  segmentation: " << v.v1 << " / " << v.v2 << " / " << v.v3 << " %\n";
    if (!a.out_path.empty()) std::cout << "wrote " << a.out_path << "\n";
}

struct ClassifyArgs {
    std::string dict_path, in_path, out_path;
    bool ignore_truth = false;
    std::size_t digest = 256;
    int threads = 1;
};

void cmd_classify(const ClassifyArgs& a) {
    const auto dict = load_dictionary(a.dict_path);
    const auto stream = read_samples_csv(a.in_path);

    Eigen::VectorXd x(static_cast<Eigen::Index>(stream.size()));
    bool all_labeled = !stream.empty();
    for (std::size_t i = 0; i < stream.size(); ++i) {
        x[static_cast<Eigen::Index>(i)] = stream[i].delta_phi;
        all_labeled = all_labeled && stream[i].labeled();
    }
    std::optional<Eigen::VectorXd> hint;
    if (all_labeled && !a.ignore_truth) {
        Eigen::VectorXd y(x.size());
        for (std::size_t i = 0; i < stream.size(); ++i)
            y[static_cast<Eigen::Index>(i)] = stream[i].true_distance;
        hint = std::move(y);
    }

    SelectOptions sel;
    sel.likelihood_digest_cap = a.digest;
    sel.threads = a.threads;
    const auto report = select_model(dict, x, hint, sel);
    if (!a.out_path.empty()) write_selection_report(a.out_path, report);

    std::cout << "chosen environment: " << report.chosen_env_id
              << (hint ? " (truth-assisted likelihood)" : " (self-consistency likelihood)") << "\n";
    for (const auto& s : report.scores)
        std::cout << "  " << s.env_id << ": weight " << s.weight << ", log-likelihood "
                  << s.log_likelihood << ", weighted " << s.weighted_score
                  << (s.failed ? " [failed]" : "") << "\n";
    if (!a.out_path.empty()) std::cout << "wrote " << a.out_path << "\n";
}

struct LocalizeArgs {
    std::string dict_path, in_path, out_dir, force_env;
    double kin_bound = 2.0;
    bool kin_per_second = false;
    bool no_constraint = false;
    int threads = 1;
};

ordered_json metrics_json(const TrackMetrics& m) {
    return ordered_json{{"mean_abs", m.mean_abs}, {"rmse", m.rmse}, {"p90", m.p90}};
}

void cmd_localize(const LocalizeArgs& a) {
    const auto dict = load_dictionary(a.dict_path);
    const auto stream = read_samples_csv(a.in_path);

    LocalizeOptions opt;
    opt.kin_bound = a.kin_bound;
    opt.kin_per_second = a.kin_per_second;
    opt.apply_constraint = !a.no_constraint;
    opt.threads = a.threads;
    if (!a.force_env.empty()) opt.force_env = a.force_env;

    const auto result = localize_stream(dict, stream, opt);

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + a.out_dir + "': " + ec.message());

    ordered_json metrics;
    metrics["format"] = "rfloc-metrics";
    metrics["version"] = 1;
    metrics["chosen_env_id"] = result.selection.chosen_env_id;
    metrics["selection_forced"] = result.selection_forced;
    auto tags = ordered_json::array();
    for (const auto& track : result.tracks) {
        std::vector<TrackRow> rows(track.times.size());
        for (std::size_t i = 0; i < track.times.size(); ++i) {
            rows[i] = {track.tag_id,          track.times[i],
                       track.raw_ranges[i],   track.constrained_ranges[i],
                       track.positions[i].x(), track.positions[i].y()};
        }
        write_track_csv(fs::path(a.out_dir) / ("track_" + track.tag_id + ".csv"), rows);

        ordered_json tj;
        tj["tag_id"] = track.tag_id;
        tj["samples"] = track.times.size();
        if (track.raw_metrics) tj["raw_range_error"] = metrics_json(*track.raw_metrics);
        if (track.constrained_metrics)
            tj["constrained_range_error"] = metrics_json(*track.constrained_metrics);
        if (track.position_metrics) tj["position_error"] = metrics_json(*track.position_metrics);
        tags.push_back(std::move(tj));
    }
    metrics["per_tag"] = tags;
    if (result.overall_raw) metrics["overall_raw_range_error"] = metrics_json(*result.overall_raw);
    if (result.overall_constrained)
        metrics["overall_constrained_range_error"] = metrics_json(*result.overall_constrained);
    {
        std::ofstream out(fs::path(a.out_dir) / "metrics.json", std::ios::binary);
        out << metrics.dump(2) << "\n";
        if (!out)
            throw IoError("write failed: " + (fs::path(a.out_dir) / "metrics.json").string());
    }
    if (!result.selection_forced)
        write_selection_report(fs::path(a.out_dir) / "selection.json", result.selection);

    std::cout << result.tracks.size() << " tag(s) localized with model "
              << result.selection.chosen_env_id << "\n";
    if (result.overall_raw)
        std::cout << "  raw range error: mean " << result.overall_raw->mean_abs << " m, p90 "
                  << result.overall_raw->p90 << " m\n";
    if (result.overall_constrained)
        std::cout << "  constrained:     mean " << result.overall_constrained->mean_abs
                  << " m, p90 " << result.overall_constrained->p90 << " m\n";
    std::cout << "wrote " << a.out_dir << "\n";
}

struct BenchArgs {
    BenchConfig cfg;
    std::string out_dir;
    std::string experiment = "all";
    int trials = 100;
    std::string thresholds_path;
};

void cmd_bench(const BenchArgs& a) {
    BenchConfig cfg = a.cfg;
    if (!a.thresholds_path.empty()) cfg.thresholds = load_bench_thresholds(a.thresholds_path);

    std::vector<ExperimentResult> results;
    const auto want = [&](const std::string& name) {
        return a.experiment == "all" || a.experiment == name;
    };
    if (want("kernel_table")) results.push_back(exp_kernel_table(cfg));
    if (want("model_choice")) results.push_back(exp_model_choice(cfg));
    if (want("selection_trials")) results.push_back(exp_selection_trials(cfg, a.trials));
    if (want("multitag_drift")) results.push_back(exp_multitag_drift(cfg));
    if (want("unseen_env")) results.push_back(exp_unseen_env(cfg));
    if (want("throughput")) results.push_back(exp_throughput(cfg));
    if (results.empty())
        throw ValidationError("bench: unknown experiment '" + a.experiment + "'");

    bool all_pass = true;
    for (const auto& r : results) {
        write_experiment(a.out_dir, r);
        std::cout << r.summary();
        all_pass = all_pass && r.passed();
    }
    std::cout << (all_pass ? "bench: all experiments passed" : "bench: FAILURES present") << "\n";
    if (!all_pass)
        throw NumericalError("bench: at least one experiment check failed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RFID phase-difference ranging with per-environment GP models"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an ini-style config file");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a labeled dataset from an environment spec");
    sim_cmd->add_option("--spec", sim_args.spec_path, "environment spec file")->required();
    sim_cmd->add_option("--out", sim_args.out_path, "output dataset CSV")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "override the spec's seed")
        ->each([&](const std::string&) { sim_args.seed_given = true; });
    sim_cmd->add_option("--samples", sim_args.samples, "samples per grid position");
    sim_cmd->add_option("--rate", sim_args.rate, "sampling rate [Hz]");
    sim_cmd->add_option("--d-min", sim_args.d_min, "grid: closest distance [m]");
    sim_cmd->add_option("--d-max", sim_args.d_max, "grid: farthest distance [m]");
    sim_cmd->add_option("--d-step", sim_args.d_step, "grid: distance step [m]");
    sim_cmd->add_option("--angle-min", sim_args.angle_min, "grid: first bearing [deg]");
    sim_cmd->add_option("--angle-max", sim_args.angle_max, "grid: last bearing [deg]");
    sim_cmd->add_option("--angle-step", sim_args.angle_step, "grid: bearing step [deg]");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "fit a GP range model from a labeled dataset");
    train_cmd->add_option("--in", train_args.in_path, "training dataset CSV")->required();
    train_cmd->add_option("--out", train_args.out_path, "model file to write");
    train_cmd->add_option("--dict", train_args.dict_path, "dictionary directory to register into");
    train_cmd->add_option("--env-id", train_args.env_id, "environment id (default: input stem)");
    train_cmd->add_option("--kernel", train_args.kernel, "rbf|matern15|matern25|rq");
    train_cmd->add_option("--length-scale", train_args.length_scale, "kernel length scale [rad]");
    train_cmd->add_option("--noise-var", train_args.noise_var, "observation noise variance [m^2]");
    train_cmd->add_option("--jitter", train_args.jitter, "initial factorization jitter");
    train_cmd->add_option("--rq-alpha", train_args.rq_alpha, "rational-quadratic shape");
    train_cmd->add_option("--cap", train_args.cap, "training point cap");
    train_cmd->add_option("--phi-min", train_args.phi_min, "linear band lower threshold [rad]");
    train_cmd->add_option("--phi-max", train_args.phi_max, "linear band upper threshold [rad]");

    ClassifyArgs classify_args;
    auto* classify_cmd = app.add_subcommand("classify", "select the best-matching environment model");
    classify_cmd->add_option("--dict", classify_args.dict_path, "dictionary directory")->required();
    classify_cmd->add_option("--in", classify_args.in_path, "sample stream CSV")->required();
    classify_cmd->add_option("--out", classify_args.out_path, "selection report JSON");
    classify_cmd->add_flag("--ignore-truth", classify_args.ignore_truth,
                           "score without ground-truth ranges even if present");
    classify_cmd->add_option("--digest", classify_args.digest, "likelihood digest size");
    classify_cmd->add_option("--threads", classify_args.threads, "parallel model evaluations");

    LocalizeArgs localize_args;
    auto* localize_cmd = app.add_subcommand("localize", "rangings + positions for every tag in a stream");
    localize_cmd->add_option("--dict", localize_args.dict_path, "dictionary directory")->required();
    localize_cmd->add_option("--in", localize_args.in_path, "sample stream CSV")->required();
    localize_cmd->add_option("--out", localize_args.out_dir, "output directory")->required();
    localize_cmd->add_option("--kin-bound", localize_args.kin_bound,
                             "kinematic bound [m per step, or m/s with --kin-per-second]");
    localize_cmd->add_flag("--kin-per-second", localize_args.kin_per_second,
                           "scale the kinematic bound by each step's dt");
    localize_cmd->add_flag("--no-constraint", localize_args.no_constraint,
                           "skip the kinematic constraint");
    localize_cmd->add_option("--env", localize_args.force_env, "force an environment model");
    localize_cmd->add_option("--threads", localize_args.threads, "parallel per-tag processing");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "seeded experiment suite over the presets");
    bench_cmd->add_option("--presets", bench_args.cfg.preset_dir, "preset directory");
    bench_cmd->add_option("--out", bench_args.out_dir, "output directory")->required();
    bench_cmd
        ->add_option("--exp", bench_args.experiment,
                     "all|kernel_table|model_choice|selection_trials|multitag_drift|unseen_env|throughput")
        ->default_val("all");
    bench_cmd->add_option("--seed", bench_args.cfg.seed, "shift every derived RNG stream");
    bench_cmd->add_option("--cap", bench_args.cfg.cap, "GP training cap");
    bench_cmd->add_option("--k", bench_args.cfg.knn_k, "KNN baseline k");
    bench_cmd->add_option("--threads", bench_args.cfg.threads, "worker threads");
    bench_cmd->add_option("--trials", bench_args.trials, "classification trials per environment");
    bench_cmd->add_option("--thresholds", bench_args.thresholds_path,
                          "pass/fail thresholds override file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (sim_cmd->parsed()) cmd_simulate(sim_args);
        if (train_cmd->parsed()) cmd_train(train_args);
        if (classify_cmd->parsed()) cmd_classify(classify_args);
        if (localize_cmd->parsed()) cmd_localize(localize_args);
        if (bench_cmd->parsed()) cmd_bench(bench_args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
