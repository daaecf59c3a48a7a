#pragma once

#include <filesystem>
#include <vector>

#include "rfloc/types.hpp"

namespace rfloc {

/// Loads every *.cfg environment spec in a directory, sorted by filename.
std::vector<EnvironmentSpec> load_presets(const std::filesystem::path& dir);

/// The preset with the given id, or a ValidationError naming the known ids.
EnvironmentSpec preset_by_id(const std::vector<EnvironmentSpec>& presets, const std::string& id);

} // namespace rfloc
