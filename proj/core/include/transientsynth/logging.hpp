#pragma once

namespace tsynth {

// Sets the global log level from TRANSIENTSYNTH_LOG
// (trace|debug|info|warn|error|off; default info).
void init_logging();

}  // namespace tsynth
