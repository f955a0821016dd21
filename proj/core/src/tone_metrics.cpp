#include "transientsynth/tone_metrics.hpp"

#include <cmath>

#include "transientsynth/probe.hpp"

namespace tsynth {

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

RmsEnvelope rms_envelope(std::span<const double> audio, std::size_t window, std::size_t hop) {
  RmsEnvelope env;
  env.window = window;
  env.hop = hop;
  for (std::size_t start = 0; start + window <= audio.size(); start += hop) {
    env.rms.push_back(rms(audio.subspan(start, window)));
  }
  return env;
}

std::optional<double> fundamental_hz(std::span<const double> audio, int sample_rate) {
  const auto period = estimate_period(audio, 256);
  if (!period) return std::nullopt;
  return sample_rate / *period;
}

std::optional<std::size_t> rise_time(std::span<const double> audio, std::size_t onset, double steady_rms,
                                     std::size_t window, std::size_t hop) {
  const auto env = rms_envelope(audio, window, hop);
  std::optional<std::size_t> t10;
  for (std::size_t f = 0; f < env.rms.size(); ++f) {
    const std::size_t c = env.center(f);
    if (c < onset) continue;
    if (!t10 && env.rms[f] >= 0.1 * steady_rms) t10 = c;
    if (t10 && env.rms[f] >= 0.9 * steady_rms) return c - *t10;
  }
  return std::nullopt;
}

std::optional<std::size_t> decay_time(std::span<const double> audio, std::size_t offset, double steady_rms,
                                      double fraction, std::size_t window, std::size_t hop) {
  const auto env = rms_envelope(audio, window, hop);
  for (std::size_t f = 0; f < env.rms.size(); ++f) {
    const std::size_t c = env.center(f);
    if (c < offset) continue;
    if (env.rms[f] < fraction * steady_rms) return c - offset;
  }
  return std::nullopt;
}

std::size_t longest_saturated_run(std::span<const MuLawCode> codes) {
  std::size_t best = 0, run = 0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const bool sat = codes[i] == 0 || codes[i] == 255;
    run = sat && i > 0 && codes[i] == codes[i - 1] ? run + 1 : (sat ? 1 : 0);
    best = std::max(best, run);
  }
  return best;
}

}  // namespace tsynth
