#pragma once

#include <filesystem>
#include <string_view>

#include "transientsynth/synthesis.hpp"

namespace tsynth {

// Control score text: one event per line, `time_sec pitch volume instrument`,
// '#' starts a comment, blank lines ignored. Throws InvalidArgument naming the
// offending line.
ControlSchedule parse_score(std::string_view text);
ControlSchedule read_score(const std::filesystem::path& path);

}  // namespace tsynth
