#include "rfloc/presets.hpp"

#include <algorithm>

#include "rfloc/io.hpp"

namespace rfloc {

namespace fs = std::filesystem;

std::vector<EnvironmentSpec> load_presets(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw IoError("preset directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".cfg")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<EnvironmentSpec> specs;
    specs.reserve(files.size());
    for (const auto& f : files) specs.push_back(read_env_spec(f));
    return specs;
}

EnvironmentSpec preset_by_id(const std::vector<EnvironmentSpec>& presets, const std::string& id) {
    for (const auto& s : presets)
        if (s.id == id) return s;
    std::string known;
    for (const auto& s : presets) {
        if (!known.empty()) known += ", ";
        known += s.id;
    }
    throw ValidationError("unknown environment preset '" + id + "' (known: " + known + ")");
}

} // namespace rfloc
