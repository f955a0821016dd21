#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "transientsynth/codec.hpp"
#include "transientsynth/network.hpp"
#include "transientsynth/trace.hpp"

namespace tsynth {

struct GeneratorState {
  HiddenState hidden;
  MuLawCode last_code = kSilenceCode;
  std::uint64_t sample_clock = 0;
};

// Zero hidden state plus a single uniformly drawn audio code.
GeneratorState prime(const NetworkConfig& config, std::uint64_t seed);

// Index of the largest logit; ties go to the lowest index. Throws
// NumericError on a non-finite logit.
MuLawCode argmax_code(const LogitVector& logits);

// Draws from softmax(logits / temperature). Experimental; generation
// defaults to argmax.
MuLawCode sample_code(const LogitVector& logits, double temperature, std::mt19937_64& rng);

// Functional single step: feeds the previous emission back with the given controls.
std::pair<MuLawCode, GeneratorState> step(const NetworkParams& params, const GeneratorState& state,
                                          const Controls& controls);

// Stateful generator for long runs. Holds a reference to shared, read-only
// parameters and owns its hidden state.
class Generator {
 public:
  Generator(const NetworkParams& params, std::uint64_t prime_seed);
  Generator(const NetworkParams& params, GeneratorState state);

  MuLawCode step(const Controls& controls);

  // Switches to temperature sampling (temperature > 0) or back to argmax (<= 0).
  void set_temperature(double temperature, std::uint64_t seed = 0);

  const GeneratorState& state() const { return state_; }
  const LogitVector& last_logits() const { return *logits_; }
  void copy_activations(Activations& out) const { eval_.copy_activations(state_.hidden, out); }
  const NetworkParams& params() const { return *params_; }

 private:
  const NetworkParams* params_;
  StepEvaluator eval_;
  GeneratorState state_;
  const LogitVector* logits_ = nullptr;
  double temperature_ = 0.0;
  std::mt19937_64 rng_;
};

struct ControlEvent {
  double time = 0.0;
  double pitch = 0.0;
  double volume = 0.0;
  double instrument = 0.0;
};

// Timestamped control values with hold-last semantics. Before the first
// event all controls are zero.
class ControlSchedule {
 public:
  ControlSchedule() = default;
  // Throws InvalidArgument if times decrease or a value leaves [0,1].
  explicit ControlSchedule(std::vector<ControlEvent> events);

  const std::vector<ControlEvent>& events() const { return events_; }
  Controls at(double t) const;
  double last_time() const { return events_.empty() ? 0.0 : events_.back().time; }

  // Sequential sampler for monotonically increasing sample indices.
  class Cursor {
   public:
    explicit Cursor(const ControlSchedule& s) : schedule_(&s) {}
    Controls at_sample(std::uint64_t n, int sample_rate = kSampleRate);

   private:
    const ControlSchedule* schedule_;
    std::size_t next_ = 0;
    Controls current_{};
  };

 private:
  std::vector<ControlEvent> events_;
};

struct RenderOptions {
  std::uint64_t prime_seed = 0;
  bool capture = false;
  double temperature = 0.0;  // 0 = argmax
  int sample_rate = kSampleRate;
};

struct RenderResult {
  std::vector<MuLawCode> codes;
  std::vector<double> audio;  // decoded codes
  ConditioningTracks controls;
  std::optional<ActivationTrace> trace;
};

// Runs duration * sample_rate generation steps, sampling the schedule at
// every sample boundary.
RenderResult render(const NetworkParams& params, const ControlSchedule& schedule, double duration,
                    const RenderOptions& options = {});

struct Preset {
  std::string name;
  std::string description;
  ControlSchedule schedule;
  double duration = 0.0;
  // Sample indices where the volume control jumps (empty for smooth presets).
  std::vector<std::size_t> edges;
};

// fig3a | fig3b | fig3c | fig7 | sweep
std::optional<Preset> find_preset(const std::string& name);
std::vector<std::string> preset_names();

// Linear volume ramp sampled once per sample (the schedule never interpolates).
std::vector<ControlEvent> volume_ramp(double t0, double t1, double v0, double v1, double pitch, double instrument,
                                      int sample_rate = kSampleRate);

// Volume 0 until `onset`, then `volume` until `offset` (if given), then 0.
ControlSchedule note_schedule(double pitch, double volume, double instrument, double onset,
                              std::optional<double> offset = std::nullopt);

}  // namespace tsynth
