#include "transientsynth/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

namespace tsynth {

void init_logging() {
  const char* env = std::getenv("TRANSIENTSYNTH_LOG");
  const auto level = env ? spdlog::level::from_str(env) : spdlog::level::info;
  // from_str maps unknown names to off; keep info for typos.
  if (env && level == spdlog::level::off && std::string(env) != "off") {
    spdlog::set_level(spdlog::level::info);
    spdlog::warn("unknown TRANSIENTSYNTH_LOG level '{}', using info", env);
    return;
  }
  spdlog::set_level(level);
}

}  // namespace tsynth
