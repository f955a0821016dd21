#include "transientsynth/score.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

ControlSchedule parse_score(std::string_view text) {
  std::vector<ControlEvent> events;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ControlEvent e;
    if (!(fields >> e.time)) {
      std::string rest;
      if (std::istringstream(line) >> rest) throw InvalidArgument("score line " + std::to_string(line_no) + ": bad time");
      continue;
    }
    std::string extra;
    if (!(fields >> e.pitch >> e.volume >> e.instrument) || (fields >> extra)) {
      throw InvalidArgument("score line " + std::to_string(line_no) + ": expected `time pitch volume instrument`");
    }
    events.push_back(e);
  }
  try {
    return ControlSchedule(std::move(events));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("score: ") + e.what());
  }
}

ControlSchedule read_score(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open score");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_score(buf.str());
}

}  // namespace tsynth
