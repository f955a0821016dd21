#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "transientsynth/codec.hpp"

namespace tsynth {

struct Partial {
  int harmonic = 1;
  double amplitude = 1.0;
};

// Additive instrument: fixed partials plus constant-slope volume transients.
// Slopes are in normalized volume units per second; decay_slope is the
// magnitude of the downward slope.
struct InstrumentSpec {
  std::string name;
  double control_value = 0.0;  // value of the instrument conditioning input
  std::vector<Partial> partials;
  double attack_slope = 10.0;
  double decay_slope = 10.0;
};

InstrumentSpec synth_even();  // harmonics 2,4,6,8; +/-10 units/s
InstrumentSpec synth_odd();   // harmonics 1,3,5,7; +100 / -5 units/s

// Throws InvalidArgument on duplicate harmonics or non-positive slopes/amplitudes.
void validate(const InstrumentSpec& spec);

// Greatest common divisor of the harmonic numbers: the waveform repeats
// at harmonic_spacing * f0.
int harmonic_spacing(const InstrumentSpec& spec);

struct NoteEvent {
  int pitch_index = 0;
  double volume_target = 0.7;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds
  // Volume held before the onset and returned to after the decay. Zero for
  // the standard grid; non-zero values give attacks from (and decays to) a
  // non-silent level.
  double base_volume = 0.0;
};

void validate(const NoteEvent& event);

// Parameter-domain volume of the sounding note at time t (seconds).
double envelope(const InstrumentSpec& spec, const NoteEvent& event, double t);

// Samples of the additive tone. Peak magnitude never exceeds 1.
// Throws InvalidArgument if a partial reaches Nyquist at this pitch.
std::vector<double> render_tone(const InstrumentSpec& spec, double pitch, const NoteEvent& event,
                                double duration, int sample_rate = kSampleRate);

struct ConditioningTracks {
  std::vector<double> pitch;
  std::vector<double> volume;
  std::vector<double> instrument;

  std::size_t size() const { return volume.size(); }
};

// Per-sample conditioning: the volume track is a step (base -> target at
// onset, back to base at offset); pitch and instrument are constant.
ConditioningTracks conditioning_tracks(const NoteEvent& event, double pitch, double instrument,
                                       double duration, int sample_rate = kSampleRate);

// Teacher-forced pairs: frames[t] carries audio[t], targets[t] = code(audio[t+1]).
struct TrainingSequence {
  std::vector<ControlFrame> frames;
  std::vector<MuLawCode> targets;
  std::string instrument;
  int pitch_index = 0;
  double volume = 0.0;

  std::size_t size() const { return frames.size(); }
};

TrainingSequence frames_from_audio(const std::vector<double>& audio, const ConditioningTracks& tracks);

// Segment durations (seconds) around a note: lead silence, attack (derived
// from the slope), steady hold, decay (derived), tail silence.
struct SegmentTiming {
  double lead = 0.100;
  double steady = 0.250;
  double tail = 0.100;
};

struct RenderedSequence {
  std::vector<double> audio;
  ConditioningTracks tracks;
  NoteEvent event;
  std::string instrument;
  double instrument_value = 0.0;
  double pitch = 0.0;
};

// Onset/offset placed on sample boundaries; duration covers the full decay.
NoteEvent grid_event(const InstrumentSpec& spec, int pitch_index, double volume,
                     const SegmentTiming& timing, double base_fraction = 0.0,
                     int sample_rate = kSampleRate);

double grid_duration(const InstrumentSpec& spec, const NoteEvent& event, const SegmentTiming& timing);

RenderedSequence render_sequence(const InstrumentSpec& spec, int pitch_index, double volume,
                                 const SegmentTiming& timing, double base_fraction = 0.0,
                                 int sample_rate = kSampleRate);

struct DatasetConfig {
  int n_pitches = 13;
  int n_volumes = 25;
  double max_volume = 0.7;
  SegmentTiming timing;
  int sample_rate = kSampleRate;
  // Fraction of the target volume used as the pre-attack and post-decay
  // level. 0 reproduces the standard zero-to-target regime.
  double base_fraction = 0.0;
};

// Semitone indices used for a grid of n pitches, evenly spread over 0..12.
std::vector<int> grid_pitch_indices(int n_pitches);

// n evenly spaced levels over (0, max_volume].
std::vector<double> grid_volumes(int n_volumes, double max_volume);

struct SequenceEntry {
  std::string audio_file;   // relative to the manifest directory
  std::string tracks_file;  // relative to the manifest directory
  std::string instrument;
  double instrument_value = 0.0;
  int pitch_index = 0;
  double pitch = 0.0;
  double volume = 0.0;
  std::size_t length = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  int sample_rate = kSampleRate;
  int n_instruments = 0;
  int n_pitches = 0;
  int n_volumes = 0;
  DatasetConfig config;
  std::vector<InstrumentSpec> instruments;
  std::vector<SequenceEntry> sequences;
};

// Renders the full instrument x pitch x volume grid into out_dir:
// manifest.json plus seq_<inst>_<pitch>_<vol>.wav and .tracks.csv.
DatasetManifest build_dataset(const std::vector<InstrumentSpec>& specs, const DatasetConfig& config,
                              const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path);

// Throws DatasetError if the sequence list does not cover the declared grid.
void validate_grid(const DatasetManifest& manifest);

ConditioningTracks read_tracks_csv(const std::filesystem::path& path);
void write_tracks_csv(const ConditioningTracks& tracks, const std::filesystem::path& path);

// Reads the audio and tracks of one entry and converts them to training pairs.
TrainingSequence load_sequence(const DatasetManifest& manifest, const SequenceEntry& entry);

std::vector<TrainingSequence> load_sequences(const DatasetManifest& manifest);

}  // namespace tsynth
