#pragma once

#include <cstdint>

namespace tsynth {

inline constexpr int kSampleRate = 16000;
inline constexpr int kNumCodes = 256;
inline constexpr double kMuLaw = 255.0;

// Lowest note of the pitch range (E4) and its span in octaves.
inline constexpr double kBaseFrequencyHz = 329.628;
inline constexpr double kPitchSpanOctaves = 1.0;
inline constexpr int kNumSemitones = 13;

inline constexpr double kVolumeRangeDb = 40.0;

inline constexpr double kInstrumentEven = 0.0;
inline constexpr double kInstrumentOdd = 1.0;

// One of the 256 companded sample values; the type's range is the code range.
using MuLawCode = std::uint8_t;

inline constexpr MuLawCode kSilenceCode = 128;

// Network input for one time step. Every component lies in [0, 1].
struct ControlFrame {
  double audio_in = 0.0;
  double pitch = 0.0;
  double volume = 0.0;
  double instrument = 0.0;
};

// Externally supplied conditioning values (everything but the audio input).
struct Controls {
  double pitch = 0.0;
  double volume = 0.0;
  double instrument = 0.0;
};

// Companding curve F(x) = sign(x) ln(1 + mu|x|) / ln(1 + mu), x clamped to [-1, 1].
double mulaw_compress(double x);

MuLawCode mulaw_encode(double x);

// Reconstructs the amplitude at the centre of the code's bin.
double mulaw_decode(MuLawCode code);

// The audio component of a ControlFrame: code / 255.
constexpr double code_to_input(MuLawCode code) { return static_cast<double>(code) / 255.0; }

// Semitone index 0..12 above E4 -> [0, 1]. Throws InvalidArgument outside 0..12.
double pitch_param(int semitone_index);

double param_to_freq(double pitch);

// Exponential 40 dB map; v == 0 is exact silence.
double volume_to_gain(double volume);

double clamp_unit(double v);

ControlFrame make_frame(MuLawCode previous, const Controls& controls);

}  // namespace tsynth
