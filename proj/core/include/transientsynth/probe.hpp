#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transientsynth/network.hpp"
#include "transientsynth/synthesis.hpp"
#include "transientsynth/trace.hpp"

namespace tsynth {

struct UnitStats {
  double dc_offset = 0.0;
  double osc_amplitude = 0.0;
  std::optional<double> period_samples;
};

struct UnitStatsOptions {
  std::size_t min_window = 200;
  std::size_t max_lag = 256;  // longest period searched, in samples
  int harmonics = 8;          // harmonics kept in the period-synchronous average
};

// Autocorrelation period: the first non-zero lag whose (unbiased)
// autocorrelation is a local peak above half of the zero-lag value, refined
// to sub-sample precision on multiples of the period.
std::optional<double> estimate_period(std::span<const double> window, std::size_t max_lag = 256);

// DC offset, oscillation amplitude and period of one unit over a window.
// With a detectable period, dc and half peak-to-peak are taken from the
// period-synchronous average waveform (robust to noise); otherwise from the
// raw mean-removed window. Throws InvalidArgument below min_window samples.
UnitStats unit_stats(std::span<const double> window, const UnitStatsOptions& options = {});

// (pi/2) * mean |x - mean|: equals A for a sinusoid of amplitude A and varies
// linearly with the fraction of the window a sinusoid occupies.
double short_window_amplitude(std::span<const double> window);

struct EnvelopeFrames {
  std::size_t window = 64;
  std::size_t hop = 16;
  std::vector<double> amplitude;  // one per frame
  std::size_t center(std::size_t frame) const { return frame * hop + window / 2; }
};

EnvelopeFrames amplitude_envelope(std::span<const double> series, std::size_t window = 64, std::size_t hop = 16);

// ---------------------------------------------------------------------------
// Pitch locking

struct PitchLockOptions {
  double instrument = kInstrumentOdd;
  double volume = 0.7;
  int harmonic_spacing = 1;  // waveform repeats at harmonic_spacing * f0
  double onset = 0.02;       // seconds of silence before the note
  double settle = 0.15;      // seconds skipped after the onset
  double window = 0.1;       // seconds analysed
  double min_amplitude = 0.02;
  double tolerance = 0.10;
  std::uint64_t prime_seed = 0;
  UnitStatsOptions stats;
};

struct PitchLockRow {
  double pitch = 0.0;
  double expected_period = 0.0;
  int layer = 0;  // 0-based
  int unit = 0;   // 0-based
  UnitStats stats;
  bool oscillating = false;
  bool locked = false;
};

struct PitchLockReport {
  std::vector<PitchLockRow> rows;

  // Fraction of oscillating units in `layer` whose period is within tolerance
  // at this pitch; nullopt when no unit oscillates.
  std::optional<double> lock_fraction(int layer, double pitch) const;
  std::size_t oscillating_count(int layer, double pitch) const;
};

double expected_period_samples(double pitch, int harmonic_spacing = 1, int sample_rate = kSampleRate);

PitchLockReport pitch_locking_report(const NetworkParams& params, std::span<const double> pitches,
                                     const PitchLockOptions& options = {});

// ---------------------------------------------------------------------------
// Volume selectivity

enum class SelectivityClass { silent, low, mid, high, broad };
std::string to_string(SelectivityClass c);

struct SelectivityProfile {
  int layer = 0;
  int unit = 0;
  bool rising = true;              // sweep direction
  std::vector<double> amplitude;   // per volume bin, ascending volume
  int peak_bin = 0;
  int bandwidth = 0;               // bins at or above half of the peak
  double centroid = 0.0;           // amplitude-weighted mean bin
  SelectivityClass cls = SelectivityClass::silent;
};

struct SweepSpec {
  double duration_up = 2.0;
  double duration_down = 2.0;
  double v_min = 0.0;
  double v_max = 0.7;
  double pitch = 0.5;
  double instrument = kInstrumentEven;
  int bins = 20;
  double silent_amplitude = 0.01;
  std::uint64_t prime_seed = 0;
  UnitStatsOptions stats;
};

// Amplitude per volume bin for one unit. `volume` gives the control value at
// each sample; samples outside [v_min, v_max] are ignored.
std::vector<double> binned_amplitude(std::span<const double> series, std::span<const double> volume, int bins,
                                     double v_min, double v_max, const UnitStatsOptions& options = {});

// Peak, bandwidth, centroid and class of an amplitude-vs-volume profile.
SelectivityProfile summarize_profile(std::vector<double> amplitude, double silent_amplitude = 0.01);

// RMS of the difference relative to the larger profile RMS.
double profile_rms_difference(std::span<const double> a, std::span<const double> b);

double pearson(std::span<const double> a, std::span<const double> b);

struct SelectivityReport {
  std::vector<double> bin_centers;
  std::vector<SelectivityProfile> up;    // n_layers * hidden, layer-major
  std::vector<SelectivityProfile> down;  // same order

  const SelectivityProfile& profile(bool rising, int layer, int unit, int hidden) const;
  // Pearson correlation between bin volume and amplitude on the rising sweep.
  double volume_correlation(int layer, int unit, int hidden) const;
};

SelectivityReport selectivity_profiles(const NetworkParams& params, const SweepSpec& spec = {});

// ---------------------------------------------------------------------------
// Transient responses

struct TransientOptions {
  std::size_t window = 64;
  std::size_t hop = 16;
  std::size_t immediate = 128;  // reaction times at or below this count as immediate
  double min_change = 0.02;
};

// Samples from `edge` to the centre of the first frame at or after the edge
// whose amplitude has moved by more than half of its eventual change.
// `segment_end` bounds the segment the edge opens. nullopt if the unit's
// amplitude does not change by at least min_change.
std::optional<std::size_t> reaction_time(std::span<const double> series, std::size_t edge, std::size_t segment_end,
                                         const TransientOptions& options = {});

struct UnitReaction {
  int layer = 0;
  int unit = 0;
  std::vector<std::optional<std::size_t>> reactions;  // one per edge
};

struct TransientMap {
  ActivationTrace trace;
  std::vector<double> audio;
  std::vector<std::size_t> edges;
  std::vector<bool> edge_rising;
  int layer = 0;
  std::vector<EnvelopeFrames> envelopes;  // one per unit of `layer`
  std::vector<UnitReaction> reactions;    // one per unit of `layer`
  std::size_t immediate_onset = 0;
  std::size_t immediate_offset = 0;
};

// Renders the preset with capture, then computes per-unit reaction times at
// every volume edge for `layer` (0-based; -1 = deepest).
TransientMap transient_response_map(const NetworkParams& params, const Preset& preset, int layer = -1,
                                    const TransientOptions& options = {}, std::uint64_t prime_seed = 0);

}  // namespace tsynth
