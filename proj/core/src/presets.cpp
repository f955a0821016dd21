#include <cmath>

#include "transientsynth/synthesis.hpp"

namespace tsynth {

namespace {

constexpr double kPresetPitch = 0.5;  // Bb4, ~466 Hz

std::size_t at_sample(double t) { return static_cast<std::size_t>(std::llround(t * kSampleRate)); }

// Piecewise-constant volume steps; returns the schedule and the edge samples.
Preset step_preset(std::string name, std::string description, double instrument,
                   const std::vector<std::pair<double, double>>& steps, double duration) {
  std::vector<ControlEvent> events;
  std::vector<std::size_t> edges;
  double previous = -1.0;
  for (const auto& [t, v] : steps) {
    events.push_back({t, kPresetPitch, v, instrument});
    if (previous >= 0.0 && v != previous) edges.push_back(at_sample(t));
    previous = v;
  }
  return {std::move(name), std::move(description), ControlSchedule(std::move(events)), duration, std::move(edges)};
}

}  // namespace

std::vector<ControlEvent> volume_ramp(double t0, double t1, double v0, double v1, double pitch, double instrument,
                                      int sample_rate) {
  std::vector<ControlEvent> out;
  const auto n0 = std::llround(t0 * sample_rate);
  const auto n1 = std::llround(t1 * sample_rate);
  const double span = static_cast<double>(n1 - n0);
  for (auto n = n0; n < n1; ++n) {
    const double frac = span > 0 ? static_cast<double>(n - n0) / span : 1.0;
    out.push_back({static_cast<double>(n) / sample_rate, pitch, v0 + (v1 - v0) * frac, instrument});
  }
  out.push_back({static_cast<double>(n1) / sample_rate, pitch, v1, instrument});
  return out;
}

ControlSchedule note_schedule(double pitch, double volume, double instrument, double onset,
                              std::optional<double> offset) {
  std::vector<ControlEvent> events{{0.0, pitch, 0.0, instrument}, {onset, pitch, volume, instrument}};
  if (offset) events.push_back({*offset, pitch, 0.0, instrument});
  return ControlSchedule(std::move(events));
}

std::vector<std::string> preset_names() { return {"fig3a", "fig3b", "fig3c", "fig7", "sweep"}; }

std::optional<Preset> find_preset(const std::string& name) {
  if (name == "fig3a") {
    std::vector<ControlEvent> events{{0.0, kPresetPitch, 0.0, kInstrumentEven}};
    for (const auto& e : volume_ramp(0.05, 0.45, 0.0, 0.7, kPresetPitch, kInstrumentEven)) events.push_back(e);
    for (const auto& e : volume_ramp(0.55, 0.95, 0.7, 0.0, kPresetPitch, kInstrumentEven)) events.push_back(e);
    return Preset{name, "SynthEven, pitch 0.5, smooth volume 0 -> 0.7 -> 0 over 400 ms ramps",
                  ControlSchedule(std::move(events)), 1.0, {}};
  }
  if (name == "fig3b") {
    return step_preset(name, "SynthEven, pitch 0.5, sudden volume steps between 0 and 0.7", kInstrumentEven,
                       {{0.0, 0.0}, {0.05, 0.7}, {0.35, 0.0}, {0.6, 0.7}, {0.9, 0.0}}, 1.2);
  }
  if (name == "fig3c") {
    return step_preset(name, "SynthOdd, pitch 0.5, sudden volume steps between 0 and 0.7", kInstrumentOdd,
                       {{0.0, 0.0}, {0.05, 0.7}, {0.35, 0.0}, {0.6, 0.7}, {0.9, 0.0}}, 1.2);
  }
  if (name == "fig7") {
    return step_preset(name, "SynthEven, pitch 0.5, volume 0 -> 0.8 -> 0", kInstrumentEven,
                       {{0.0, 0.0}, {0.05, 0.8}, {0.35, 0.0}}, 0.6);
  }
  if (name == "sweep") {
    std::vector<ControlEvent> events = volume_ramp(0.0, 2.0, 0.0, 0.7, kPresetPitch, kInstrumentEven);
    for (const auto& e : volume_ramp(2.0, 4.0, 0.7, 0.0, kPresetPitch, kInstrumentEven)) events.push_back(e);
    return Preset{name, "SynthEven, pitch 0.5, volume sweep 0 -> 0.7 over 2 s and back over 2 s",
                  ControlSchedule(std::move(events)), 4.0, {}};
  }
  return std::nullopt;
}

}  // namespace tsynth
