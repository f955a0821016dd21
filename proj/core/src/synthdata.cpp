#include "transientsynth/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

std::vector<Partial> harmonic_series(std::initializer_list<int> harmonics) {
  std::vector<Partial> out;
  for (int k : harmonics) out.push_back({k, 1.0 / k});
  return out;
}

std::size_t sample_count(double duration, int sample_rate) {
  if (!(duration > 0.0)) return 0;
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

}  // namespace

InstrumentSpec synth_even() {
  return {"SynthEven", kInstrumentEven, harmonic_series({2, 4, 6, 8}), 10.0, 10.0};
}

InstrumentSpec synth_odd() {
  return {"SynthOdd", kInstrumentOdd, harmonic_series({1, 3, 5, 7}), 100.0, 5.0};
}

void validate(const InstrumentSpec& spec) {
  if (spec.partials.empty()) throw InvalidArgument(spec.name + ": no partials");
  std::set<int> seen;
  for (const auto& p : spec.partials) {
    if (p.harmonic <= 0) throw InvalidArgument(spec.name + ": harmonic numbers must be positive");
    if (!(p.amplitude > 0.0)) throw InvalidArgument(spec.name + ": partial amplitudes must be positive");
    if (!seen.insert(p.harmonic).second) {
      throw InvalidArgument(spec.name + ": duplicate harmonic " + std::to_string(p.harmonic));
    }
  }
  if (!(spec.attack_slope > 0.0) || !(spec.decay_slope > 0.0)) {
    throw InvalidArgument(spec.name + ": attack and decay slopes must be positive");
  }
  if (spec.control_value < 0.0 || spec.control_value > 1.0) {
    throw InvalidArgument(spec.name + ": instrument control value outside [0,1]");
  }
}

int harmonic_spacing(const InstrumentSpec& spec) {
  int g = 0;
  for (const auto& p : spec.partials) g = std::gcd(g, p.harmonic);
  return std::max(g, 1);
}

void validate(const NoteEvent& event) {
  if (event.pitch_index < 0 || event.pitch_index >= kNumSemitones) {
    throw InvalidArgument("note pitch index outside 0..12");
  }
  if (!(event.volume_target > 0.0) || event.volume_target > 1.0) {
    throw InvalidArgument("note volume target outside (0,1]");
  }
  if (event.base_volume < 0.0 || event.base_volume >= event.volume_target) {
    throw InvalidArgument("note base volume must lie in [0, target)");
  }
  if (!(event.onset < event.offset)) throw InvalidArgument("note onset must precede offset");
}

double envelope(const InstrumentSpec& spec, const NoteEvent& event, double t) {
  const double base = event.base_volume;
  if (t < event.onset) return base;
  const auto attack_level = [&](double since_onset) {
    return std::min(event.volume_target, base + spec.attack_slope * since_onset);
  };
  if (t < event.offset) return attack_level(t - event.onset);
  const double at_offset = attack_level(event.offset - event.onset);
  return std::max(base, at_offset - spec.decay_slope * (t - event.offset));
}

std::vector<double> render_tone(const InstrumentSpec& spec, double pitch, const NoteEvent& event,
                                double duration, int sample_rate) {
  validate(spec);
  const double f0 = param_to_freq(pitch);
  const double nyquist = 0.5 * sample_rate;
  double norm = 0.0;
  for (const auto& p : spec.partials) {
    if (p.harmonic * f0 >= nyquist) {
      throw InvalidArgument(spec.name + ": harmonic " + std::to_string(p.harmonic) + " at " +
                            std::to_string(p.harmonic * f0) + " Hz reaches Nyquist");
    }
    norm += p.amplitude;
  }

  const std::size_t n = sample_count(duration, sample_rate);
  std::vector<double> out(n, 0.0);
  const double w = 2.0 * std::numbers::pi * f0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double gain = volume_to_gain(envelope(spec, event, t));
    if (gain == 0.0) continue;
    double s = 0.0;
    for (const auto& p : spec.partials) s += p.amplitude * std::sin(w * p.harmonic * t);
    out[i] = gain * s / norm;
  }
  return out;
}

ConditioningTracks conditioning_tracks(const NoteEvent& event, double pitch, double instrument,
                                       double duration, int sample_rate) {
  const std::size_t n = sample_count(duration, sample_rate);
  ConditioningTracks tracks;
  tracks.pitch.assign(n, pitch);
  tracks.instrument.assign(n, instrument);
  tracks.volume.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    tracks.volume[i] = (t >= event.onset && t < event.offset) ? event.volume_target : event.base_volume;
  }
  return tracks;
}

TrainingSequence frames_from_audio(const std::vector<double>& audio, const ConditioningTracks& tracks) {
  const std::size_t n = audio.size();
  if (tracks.pitch.size() != n || tracks.volume.size() != n || tracks.instrument.size() != n) {
    throw InvalidArgument("audio and conditioning tracks differ in length");
  }
  if (n < 2) throw InvalidArgument("need at least two samples to form a training pair");

  TrainingSequence seq;
  seq.frames.reserve(n - 1);
  seq.targets.reserve(n - 1);
  MuLawCode current = mulaw_encode(audio[0]);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const MuLawCode next = mulaw_encode(audio[t + 1]);
    seq.frames.push_back({code_to_input(current), tracks.pitch[t], tracks.volume[t], tracks.instrument[t]});
    seq.targets.push_back(next);
    current = next;
  }
  return seq;
}

NoteEvent grid_event(const InstrumentSpec& spec, int pitch_index, double volume,
                     const SegmentTiming& timing, double base_fraction, int sample_rate) {
  const double sr = sample_rate;
  const double base = base_fraction * volume;
  const auto onset_n = std::llround(timing.lead * sr);
  const auto attack_n = std::llround((volume - base) / spec.attack_slope * sr);
  const auto steady_n = std::llround(timing.steady * sr);
  NoteEvent ev;
  ev.pitch_index = pitch_index;
  ev.volume_target = volume;
  ev.base_volume = base;
  ev.onset = static_cast<double>(onset_n) / sr;
  ev.offset = static_cast<double>(onset_n + attack_n + steady_n) / sr;
  return ev;
}

double grid_duration(const InstrumentSpec& spec, const NoteEvent& event, const SegmentTiming& timing) {
  const double decay = (event.volume_target - event.base_volume) / spec.decay_slope;
  return event.offset + decay + timing.tail;
}

RenderedSequence render_sequence(const InstrumentSpec& spec, int pitch_index, double volume,
                                 const SegmentTiming& timing, double base_fraction, int sample_rate) {
  RenderedSequence out;
  out.event = grid_event(spec, pitch_index, volume, timing, base_fraction, sample_rate);
  validate(out.event);
  out.pitch = pitch_param(pitch_index);
  out.instrument = spec.name;
  out.instrument_value = spec.control_value;
  const double duration = grid_duration(spec, out.event, timing);
  out.audio = render_tone(spec, out.pitch, out.event, duration, sample_rate);
  out.tracks = conditioning_tracks(out.event, out.pitch, spec.control_value, duration, sample_rate);
  return out;
}

std::vector<int> grid_pitch_indices(int n_pitches) {
  if (n_pitches < 1 || n_pitches > kNumSemitones) throw InvalidArgument("pitch grid size outside 1..13");
  if (n_pitches == 1) return {(kNumSemitones - 1) / 2};
  std::vector<int> out;
  for (int i = 0; i < n_pitches; ++i) {
    out.push_back(static_cast<int>(std::lround(static_cast<double>(i) * (kNumSemitones - 1) / (n_pitches - 1))));
  }
  return out;
}

std::vector<double> grid_volumes(int n_volumes, double max_volume) {
  if (n_volumes < 1) throw InvalidArgument("volume grid needs at least one level");
  if (!(max_volume > 0.0) || max_volume > 1.0) throw InvalidArgument("max volume outside (0,1]");
  std::vector<double> out;
  for (int k = 1; k <= n_volumes; ++k) out.push_back(max_volume * k / n_volumes);
  return out;
}

}  // namespace tsynth
