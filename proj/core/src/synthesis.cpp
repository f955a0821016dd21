#include "transientsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "transientsynth/errors.hpp"

namespace tsynth {

std::vector<double> ActivationTrace::unit_series(int layer, int unit) const {
  return unit_series(layer, unit, 0, n_samples());
}

std::vector<double> ActivationTrace::unit_series(int layer, int unit, std::size_t begin, std::size_t end) const {
  if (layer < 0 || layer >= n_layers || unit < 0 || unit >= hidden) throw InvalidArgument("trace unit out of range");
  end = std::min(end, n_samples());
  std::vector<double> out;
  if (begin >= end) return out;
  out.reserve(end - begin);
  for (std::size_t t = begin; t < end; ++t) out.push_back(at(t, layer, unit));
  return out;
}

GeneratorState prime(const NetworkConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GeneratorState s;
  s.hidden = HiddenState::zeros(config);
  s.last_code = static_cast<MuLawCode>(rng() >> 56);
  s.sample_clock = 0;
  return s;
}

MuLawCode argmax_code(const LogitVector& logits) {
  if (logits.size() == 0 || !logits.allFinite()) throw NumericError("non-finite or empty logits at emission");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<MuLawCode>(std::min<Eigen::Index>(best, kNumCodes - 1));
}

MuLawCode sample_code(const LogitVector& logits, double temperature, std::mt19937_64& rng) {
  if (!(temperature > 0.0)) return argmax_code(logits);
  if (!logits.allFinite()) throw NumericError("non-finite logits at emission");
  const Vector p = softmax(logits / temperature);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<MuLawCode>(i);
  }
  return static_cast<MuLawCode>(p.size() - 1);
}

std::pair<MuLawCode, GeneratorState> step(const NetworkParams& params, const GeneratorState& state,
                                          const Controls& controls) {
  Generator g(params, state);
  const MuLawCode code = g.step(controls);
  return {code, g.state()};
}

Generator::Generator(const NetworkParams& params, std::uint64_t prime_seed)
    : Generator(params, prime(params.config, prime_seed)) {}

Generator::Generator(const NetworkParams& params, GeneratorState state)
    : params_(&params), eval_(params.config), state_(std::move(state)) {}

void Generator::set_temperature(double temperature, std::uint64_t seed) {
  temperature_ = temperature;
  rng_.seed(seed);
}

MuLawCode Generator::step(const Controls& controls) {
  const ControlFrame frame{code_to_input(state_.last_code), clamp_unit(controls.pitch), clamp_unit(controls.volume),
                           clamp_unit(controls.instrument)};
  logits_ = &eval_.step(*params_, frame, state_.hidden);
  const MuLawCode code = temperature_ > 0.0 ? sample_code(*logits_, temperature_, rng_) : argmax_code(*logits_);
  state_.last_code = code;
  ++state_.sample_clock;
  return code;
}

ControlSchedule::ControlSchedule(std::vector<ControlEvent> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& e = events_[i];
    if (!std::isfinite(e.time) || e.time < 0.0) throw InvalidArgument("schedule times must be finite and >= 0");
    if (i > 0 && e.time < events_[i - 1].time) throw InvalidArgument("schedule times must be non-decreasing");
    for (double v : {e.pitch, e.volume, e.instrument}) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("schedule values must lie in [0,1]");
    }
  }
}

Controls ControlSchedule::at(double t) const {
  const auto it = std::upper_bound(events_.begin(), events_.end(), t,
                                   [](double time, const ControlEvent& e) { return time < e.time; });
  if (it == events_.begin()) return {};
  const auto& e = *std::prev(it);
  return {e.pitch, e.volume, e.instrument};
}

Controls ControlSchedule::Cursor::at_sample(std::uint64_t n, int sample_rate) {
  const double t = static_cast<double>(n) / sample_rate;
  const auto& ev = schedule_->events_;
  while (next_ < ev.size() && ev[next_].time <= t) {
    current_ = {ev[next_].pitch, ev[next_].volume, ev[next_].instrument};
    ++next_;
  }
  return current_;
}

RenderResult render(const NetworkParams& params, const ControlSchedule& schedule, double duration,
                    const RenderOptions& options) {
  RenderResult out;
  const std::size_t n = duration > 0.0 ? static_cast<std::size_t>(std::llround(duration * options.sample_rate)) : 0;
  Generator gen(params, options.prime_seed);
  if (options.temperature > 0.0) gen.set_temperature(options.temperature, options.prime_seed ^ 0x5bd1e995ULL);
  ControlSchedule::Cursor cursor(schedule);

  out.codes.reserve(n);
  out.audio.reserve(n);
  for (auto* track : {&out.controls.pitch, &out.controls.volume, &out.controls.instrument}) track->reserve(n);
  if (options.capture) {
    out.trace.emplace();
    out.trace->n_layers = params.config.n_layers;
    out.trace->hidden = params.config.hidden;
    out.trace->values.reserve(n * out.trace->width());
  }

  Activations act;
  for (std::size_t i = 0; i < n; ++i) {
    const Controls c = cursor.at_sample(i, options.sample_rate);
    const MuLawCode code = gen.step(c);
    out.codes.push_back(code);
    out.audio.push_back(mulaw_decode(code));
    out.controls.pitch.push_back(c.pitch);
    out.controls.volume.push_back(c.volume);
    out.controls.instrument.push_back(c.instrument);
    if (options.capture) {
      gen.copy_activations(act);
      out.trace->values.insert(out.trace->values.end(), act.begin(), act.end());
    }
  }
  if (out.trace) out.trace->controls = out.controls;
  return out;
}

}  // namespace tsynth
