#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "transientsynth/codec.hpp"

namespace tsynth {

double rms(std::span<const double> x);

// Short-time RMS; frame f covers [f * hop, f * hop + window).
struct RmsEnvelope {
  std::size_t window = 128;
  std::size_t hop = 16;
  std::vector<double> rms;
  std::size_t center(std::size_t f) const { return f * hop + window / 2; }
};

RmsEnvelope rms_envelope(std::span<const double> audio, std::size_t window = 128, std::size_t hop = 16);

// Repetition frequency of the waveform from its autocorrelation period.
std::optional<double> fundamental_hz(std::span<const double> audio, int sample_rate = kSampleRate);

// Samples between the envelope first reaching 10% and 90% of `steady_rms`
// after `onset`.
std::optional<std::size_t> rise_time(std::span<const double> audio, std::size_t onset, double steady_rms,
                                     std::size_t window = 128, std::size_t hop = 16);

// Samples from `offset` until the envelope first drops below
// `fraction * steady_rms`.
std::optional<std::size_t> decay_time(std::span<const double> audio, std::size_t offset, double steady_rms,
                                      double fraction = 0.1, std::size_t window = 128, std::size_t hop = 16);

// Longest run of identical saturated codes (0 or 255).
std::size_t longest_saturated_run(std::span<const MuLawCode> codes);

}  // namespace tsynth
