#include "rfloc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace rfloc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw IoError("could not parse number '" + std::string(s) + "' in " + context);
    return v;
}

std::uint64_t parse_u64(std::string_view s, const std::string& context) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError("could not parse integer '" + std::string(s) + "' in " + context);
    return v;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::vector<std::string_view> split_csv_line(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

// --- environment spec ------------------------------------------------------

EnvironmentSpec read_env_spec(const fs::path& path) {
    auto in = open_in(path);
    EnvironmentSpec spec;
    bool saw_id = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(trimmed.substr(0, eq));
        const std::string value = trim(trimmed.substr(eq + 1));
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        if (key == "id") {
            spec.id = value;
            saw_id = true;
        } else if (key == "path_loss_exponent") {
            spec.path_loss_exponent = parse_double(value, ctx);
        } else if (key == "rssi_ref_dbm") {
            spec.rssi_ref_dbm = parse_double(value, ctx);
        } else if (key == "phase_offset_rad") {
            spec.phase_offset_rad = parse_double(value, ctx);
        } else if (key == "noise_sigma_rad") {
            spec.noise_sigma_rad = parse_double(value, ctx);
        } else if (key == "spike_rate") {
            spec.spike_rate = parse_double(value, ctx);
        } else if (key == "spike_scale_rad") {
            spec.spike_scale_rad = parse_double(value, ctx);
        } else if (key == "ripple_amp_rad") {
            spec.ripple_amp_rad = parse_double(value, ctx);
        } else if (key == "ripple_period_m") {
            spec.ripple_period_m = parse_double(value, ctx);
        } else if (key == "seed") {
            spec.seed = parse_u64(value, ctx);
        } else if (key == "dead_zone") {
            std::istringstream zs(value);
            DeadZone z;
            if (!(zs >> z.d_lo >> z.d_hi >> z.angle_lo >> z.angle_hi))
                throw IoError(ctx + ": dead_zone expects 'd_lo d_hi angle_lo angle_hi'");
            spec.dead_zones.push_back(z);
        } else {
            throw IoError(ctx + ": unknown key '" + key + "'");
        }
    }
    if (!saw_id)
        throw IoError(path.string() + ": missing 'id'");
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return spec;
}

void write_env_spec(const fs::path& path, const EnvironmentSpec& spec) {
    spec.validate();
    auto out = open_out(path);
    out << "id = " << spec.id << "\n";
    out << "path_loss_exponent = " << format_double(spec.path_loss_exponent) << "\n";
    out << "rssi_ref_dbm = " << format_double(spec.rssi_ref_dbm) << "\n";
    out << "phase_offset_rad = " << format_double(spec.phase_offset_rad) << "\n";
    out << "noise_sigma_rad = " << format_double(spec.noise_sigma_rad) << "\n";
    out << "spike_rate = " << format_double(spec.spike_rate) << "\n";
    out << "spike_scale_rad = " << format_double(spec.spike_scale_rad) << "\n";
    out << "ripple_amp_rad = " << format_double(spec.ripple_amp_rad) << "\n";
    out << "ripple_period_m = " << format_double(spec.ripple_period_m) << "\n";
    out << "seed = " << spec.seed << "\n";
    for (const auto& z : spec.dead_zones)
        out << "dead_zone = " << format_double(z.d_lo) << " " << format_double(z.d_hi) << " "
            << format_double(z.angle_lo) << " " << format_double(z.angle_hi) << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

// --- sample CSV -------------------------------------------------------------

static const char* kSampleHeader = "tag_id,t,delta_phi,rssi,f1,f2,angle,true_distance";

void write_samples_csv(const fs::path& path, const std::vector<SignalSample>& samples) {
    auto out = open_out(path);
    std::string buf;
    buf.reserve(samples.size() * 64 + 64);
    buf += kSampleHeader;
    buf += '\n';
    for (const auto& s : samples) {
        buf += s.tag_id;
        buf += ',';
        buf += format_double(s.t);
        buf += ',';
        buf += format_double(s.delta_phi);
        buf += ',';
        buf += format_double(s.rssi);
        buf += ',';
        buf += format_double(s.f1);
        buf += ',';
        buf += format_double(s.f2);
        buf += ',';
        buf += format_double(s.angle);
        buf += ',';
        if (s.labeled()) buf += format_double(s.true_distance);
        buf += '\n';
    }
    out << buf;
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::vector<SignalSample> read_samples_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSampleHeader)
        throw IoError(path.string() + ": unexpected header (want '" + kSampleHeader + "')");

    std::vector<SignalSample> samples;
    std::vector<std::string_view> fields;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        split_csv_line(line, fields);
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 8)
            throw IoError(ctx + ": expected 8 fields, got " + std::to_string(fields.size()));
        SignalSample s;
        s.tag_id = std::string(fields[0]);
        s.t = parse_double(fields[1], ctx);
        s.delta_phi = parse_double(fields[2], ctx);
        s.rssi = parse_double(fields[3], ctx);
        s.f1 = parse_double(fields[4], ctx);
        s.f2 = parse_double(fields[5], ctx);
        s.angle = parse_double(fields[6], ctx);
        if (!fields[7].empty()) {
            s.true_distance = parse_double(fields[7], ctx);
            if (!std::isfinite(s.true_distance))
                throw IoError(ctx + ": non-finite true_distance");
        }
        if (!std::isfinite(s.t) || !std::isfinite(s.delta_phi) || !std::isfinite(s.rssi) ||
            !std::isfinite(s.f1) || !std::isfinite(s.f2) || !std::isfinite(s.angle))
            throw IoError(ctx + ": non-finite field");
        if (!(s.f2 > s.f1))
            throw IoError(ctx + ": carrier pair must satisfy f2 > f1");
        if (s.delta_phi < 0.0 || s.delta_phi >= kTwoPi)
            throw IoError(ctx + ": delta_phi outside [0, 2*pi)");
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_dataset_csv(const fs::path& path, const EnvironmentDataset& ds) {
    write_samples_csv(path, ds.samples);
}

EnvironmentDataset read_dataset_csv(const fs::path& path, std::string env_id) {
    EnvironmentDataset ds;
    ds.env_id = env_id.empty() ? path.stem().string() : std::move(env_id);
    ds.samples = read_samples_csv(path);
    return ds;
}

// --- model JSON --------------------------------------------------------------

namespace {

constexpr int kModelVersion = 1;
constexpr int kDictionaryVersion = 1;
constexpr int kReportVersion = 1;

ordered_json thresholds_to_json(const SegmentationThresholds& t) {
    return ordered_json{{"phi_min", t.phi_min}, {"phi_max", t.phi_max}};
}

SegmentationThresholds thresholds_from_json(const ordered_json& j) {
    SegmentationThresholds t;
    t.phi_min = j.at("phi_min").get<double>();
    t.phi_max = j.at("phi_max").get<double>();
    return t;
}

} // namespace

void save_model(const fs::path& path, const GpEnvironmentModel& model) {
    ordered_json j;
    j["format"] = "rfloc-gp-model";
    j["version"] = kModelVersion;
    j["env_id"] = model.env_id();
    j["kernel"] = ordered_json{{"kind", to_string(model.kernel().kind)},
                               {"length_scale", model.kernel().length_scale},
                               {"noise_variance", model.kernel().noise_variance},
                               {"jitter", model.kernel().jitter},
                               {"rq_alpha", model.kernel().rq_alpha}};
    j["mean"] = ordered_json{{"slope", model.mean().slope},
                             {"intercept", model.mean().intercept},
                             {"residual_std", model.mean().residual_std}};
    if (model.mean().banded()) {
        j["mean"]["band_lo"] = model.mean().band_lo;
        j["mean"]["band_hi"] = model.mean().band_hi;
        j["mean"]["out_of_band_value"] = model.mean().out_of_band_value;
    }
    j["thresholds"] = thresholds_to_json(model.thresholds());
    j["segmentation"] = ordered_json{{"v1", model.segmentation().v1},
                                     {"v2", model.segmentation().v2},
                                     {"v3", model.segmentation().v3}};
    j["x_train"] = std::vector<double>(model.x_train().begin(), model.x_train().end());
    j["y_train"] = std::vector<double>(model.y_train().begin(), model.y_train().end());

    auto out = open_out(path);
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

GpEnvironmentModel load_model(const fs::path& path) {
    auto in = open_in(path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "rfloc-gp-model")
            throw IoError(path.string() + ": not a model file");
        if (j.at("version").get<int>() != kModelVersion)
            throw IoError(path.string() + ": unsupported model version");

        KernelConfig cfg;
        const auto& jk = j.at("kernel");
        cfg.kind = kernel_kind_from_string(jk.at("kind").get<std::string>());
        cfg.length_scale = jk.at("length_scale").get<double>();
        cfg.noise_variance = jk.at("noise_variance").get<double>();
        cfg.jitter = jk.at("jitter").get<double>();
        cfg.rq_alpha = jk.at("rq_alpha").get<double>();

        MeanFunction mean;
        mean.slope = j.at("mean").at("slope").get<double>();
        mean.intercept = j.at("mean").at("intercept").get<double>();
        mean.residual_std = j.at("mean").at("residual_std").get<double>();
        if (j.at("mean").contains("out_of_band_value")) {
            mean.band_lo = j.at("mean").at("band_lo").get<double>();
            mean.band_hi = j.at("mean").at("band_hi").get<double>();
            mean.out_of_band_value = j.at("mean").at("out_of_band_value").get<double>();
        }

        const auto thr = thresholds_from_json(j.at("thresholds"));
        const auto xv = j.at("x_train").get<std::vector<double>>();
        const auto yv = j.at("y_train").get<std::vector<double>>();
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xv.data(), static_cast<Eigen::Index>(xv.size()));
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));

        const auto& st = j.at("segmentation");
        SegmentationVector v;
        v.v1 = st.at("v1").get<double>();
        v.v2 = st.at("v2").get<double>();
        v.v3 = st.at("v3").get<double>();
        return GpEnvironmentModel::from_arrays(j.at("env_id").get<std::string>(), cfg, mean, thr,
                                               std::move(x), std::move(y), v);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed model file: " + e.what());
    }
}

// --- dictionary ---------------------------------------------------------------

namespace {

std::string model_filename(const std::string& env_id) { return env_id + ".model.json"; }

void save_manifest(const fs::path& dir, const ModelDictionary& dict) {
    ordered_json j;
    j["format"] = "rfloc-dictionary";
    j["version"] = kDictionaryVersion;
    j["thresholds"] = thresholds_to_json(dict.thresholds);
    auto arr = ordered_json::array();
    for (const auto& m : dict.models)
        arr.push_back(ordered_json{{"env_id", m.env_id()}, {"file", model_filename(m.env_id())}});
    j["models"] = arr;
    auto out = open_out(dir / "manifest.json");
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError("write failed: " + (dir / "manifest.json").string());
}

} // namespace

void save_dictionary(const fs::path& dir, const ModelDictionary& dict) {
    dict.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create dictionary directory '" + dir.string() + "': " + ec.message());
    for (const auto& m : dict.models) save_model(dir / model_filename(m.env_id()), m);
    save_manifest(dir, dict);
}

ModelDictionary load_dictionary(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    auto in = open_in(manifest_path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path.string() + ": " + e.what());
    }
    ModelDictionary dict;
    try {
        if (j.at("format").get<std::string>() != "rfloc-dictionary")
            throw IoError(manifest_path.string() + ": not a dictionary manifest");
        if (j.at("version").get<int>() != kDictionaryVersion)
            throw IoError(manifest_path.string() + ": unsupported dictionary version");
        dict.thresholds = thresholds_from_json(j.at("thresholds"));
        for (const auto& entry : j.at("models"))
            dict.models.push_back(load_model(dir / entry.at("file").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path.string() + ": malformed manifest: " + e.what());
    }
    dict.validate();
    return dict;
}

ModelDictionary register_model(const fs::path& dir, const GpEnvironmentModel& model) {
    ModelDictionary dict;
    if (fs::exists(dir / "manifest.json")) {
        dict = load_dictionary(dir);
        if (dict.thresholds.phi_min != model.thresholds().phi_min ||
            dict.thresholds.phi_max != model.thresholds().phi_max)
            throw ValidationError("register_model: thresholds differ from the dictionary's");
        std::erase_if(dict.models,
                      [&](const GpEnvironmentModel& m) { return m.env_id() == model.env_id(); });
    } else {
        dict.thresholds = model.thresholds();
    }
    dict.models.push_back(model);
    std::sort(dict.models.begin(), dict.models.end(),
              [](const GpEnvironmentModel& a, const GpEnvironmentModel& b) {
                  return a.env_id() < b.env_id();
              });
    save_dictionary(dir, dict);
    return dict;
}

// --- selection report -----------------------------------------------------------

void write_selection_report(const fs::path& path, const SelectionReport& report) {
    ordered_json j;
    j["format"] = "rfloc-selection-report";
    j["version"] = kReportVersion;
    j["chosen_env_id"] = report.chosen_env_id;
    j["chosen_index"] = report.chosen_index;
    j["input_segmentation"] = ordered_json{{"v1", report.input_segmentation.v1},
                                           {"v2", report.input_segmentation.v2},
                                           {"v3", report.input_segmentation.v3}};
    auto arr = ordered_json::array();
    for (const auto& s : report.scores) {
        ordered_json e;
        e["env_id"] = s.env_id;
        e["weight"] = s.weight;
        e["failed"] = s.failed;
        if (std::isfinite(s.log_likelihood)) {
            e["log_likelihood"] = s.log_likelihood;
            e["weighted_score"] = s.weighted_score;
        } else {
            e["log_likelihood"] = "-inf";
            e["weighted_score"] = "-inf";
        }
        arr.push_back(std::move(e));
    }
    j["models"] = arr;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

SelectionReport read_selection_report(const fs::path& path) {
    auto in = open_in(path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    SelectionReport r;
    try {
        if (j.at("format").get<std::string>() != "rfloc-selection-report")
            throw IoError(path.string() + ": not a selection report");
        r.chosen_env_id = j.at("chosen_env_id").get<std::string>();
        r.chosen_index = j.at("chosen_index").get<std::size_t>();
        r.input_segmentation.v1 = j.at("input_segmentation").at("v1").get<double>();
        r.input_segmentation.v2 = j.at("input_segmentation").at("v2").get<double>();
        r.input_segmentation.v3 = j.at("input_segmentation").at("v3").get<double>();
        for (const auto& e : j.at("models")) {
            ModelScore s;
            s.env_id = e.at("env_id").get<std::string>();
            s.weight = e.at("weight").get<double>();
            s.failed = e.at("failed").get<bool>();
            if (e.at("log_likelihood").is_string()) {
                s.log_likelihood = -std::numeric_limits<double>::infinity();
                s.weighted_score = -std::numeric_limits<double>::infinity();
            } else {
                s.log_likelihood = e.at("log_likelihood").get<double>();
                s.weighted_score = e.at("weighted_score").get<double>();
            }
            r.scores.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed report: " + e.what());
    }
    return r;
}

// --- track CSV ---------------------------------------------------------------

static const char* kTrackHeader = "tag_id,t,raw_range,constrained_range,x,y";

void write_track_csv(const fs::path& path, const std::vector<TrackRow>& rows) {
    auto out = open_out(path);
    out << kTrackHeader << "\n";
    for (const auto& r : rows) {
        out << r.tag_id << ',' << format_double(r.t) << ',' << format_double(r.raw_range) << ','
            << format_double(r.constrained_range) << ',' << format_double(r.x) << ','
            << format_double(r.y) << "\n";
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::vector<TrackRow> read_track_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrackHeader)
        throw IoError(path.string() + ": unexpected header (want '" + kTrackHeader + "')");
    std::vector<TrackRow> rows;
    std::vector<std::string_view> fields;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        split_csv_line(line, fields);
        const std::string ctx = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 6)
            throw IoError(ctx + ": expected 6 fields");
        TrackRow r;
        r.tag_id = std::string(fields[0]);
        r.t = parse_double(fields[1], ctx);
        r.raw_range = parse_double(fields[2], ctx);
        r.constrained_range = parse_double(fields[3], ctx);
        r.x = parse_double(fields[4], ctx);
        r.y = parse_double(fields[5], ctx);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace rfloc
