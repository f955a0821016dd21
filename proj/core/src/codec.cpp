#include "transientsynth/codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

double mulaw_compress(double x) {
  const double a = std::min(std::abs(x), 1.0);
  const double f = std::log1p(kMuLaw * a) / std::log1p(kMuLaw);
  return x < 0.0 ? -f : f;
}

MuLawCode mulaw_encode(double x) {
  if (std::isnan(x)) return kSilenceCode;
  const double scaled = std::floor((mulaw_compress(x) + 1.0) * 0.5 * kNumCodes);
  return static_cast<MuLawCode>(std::clamp(scaled, 0.0, static_cast<double>(kNumCodes - 1)));
}

double mulaw_decode(MuLawCode code) {
  const double y = (static_cast<double>(code) + 0.5) / kNumCodes * 2.0 - 1.0;
  const double mag = std::expm1(std::abs(y) * std::log1p(kMuLaw)) / kMuLaw;
  return y < 0.0 ? -mag : mag;
}

double pitch_param(int semitone_index) {
  if (semitone_index < 0 || semitone_index >= kNumSemitones) {
    throw InvalidArgument("semitone index " + std::to_string(semitone_index) + " outside 0..12");
  }
  return static_cast<double>(semitone_index) / (kNumSemitones - 1);
}

double param_to_freq(double pitch) { return kBaseFrequencyHz * std::exp2(pitch * kPitchSpanOctaves); }

double volume_to_gain(double volume) {
  if (volume <= 0.0) return 0.0;
  const double v = std::min(volume, 1.0);
  return std::pow(10.0, -kVolumeRangeDb * (1.0 - v) / 20.0);
}

double clamp_unit(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, 1.0);
}

ControlFrame make_frame(MuLawCode previous, const Controls& controls) {
  return {code_to_input(previous), controls.pitch, controls.volume, controls.instrument};
}

}  // namespace tsynth
