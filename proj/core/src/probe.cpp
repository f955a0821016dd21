#include "transientsynth/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

double mean_of(std::span<const double> x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased autocorrelation of a mean-removed series at one lag.
double autocorr(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size() - lag;
  double s = 0.0;
  for (std::size_t t = 0; t < n; ++t) s += x[t] * x[t + lag];
  return s / static_cast<double>(n);
}

// Vertex of the parabola through (k-1, a), (k, b), (k+1, c).
double parabolic_peak(double k, double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return k;
  const double shift = 0.5 * (a - c) / denom;
  return k + std::clamp(shift, -0.5, 0.5);
}

std::vector<double> centered(std::span<const double> window) {
  const double m = mean_of(window);
  std::vector<double> x(window.begin(), window.end());
  for (double& v : x) v -= m;
  return x;
}

// Period-synchronous average: fold by phase into `bins` bins, keep the first
// `harmonics` Fourier terms (with the bin-averaging attenuation undone).
// Returns {dc, half peak-to-peak}.
std::pair<double, double> folded_stats(std::span<const double> window, double period, int harmonics) {
  const int bins = std::max(8, static_cast<int>(std::floor(period)));
  std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  for (std::size_t t = 0; t < window.size(); ++t) {
    double phase = std::fmod(static_cast<double>(t), period) / period;
    auto b = static_cast<std::size_t>(phase * bins);
    b = std::min<std::size_t>(b, static_cast<std::size_t>(bins - 1));
    sum[b] += window[t];
    ++count[b];
  }
  std::vector<double> avg;
  std::vector<double> phase_of;
  for (int b = 0; b < bins; ++b) {
    if (count[static_cast<std::size_t>(b)] == 0) continue;
    avg.push_back(sum[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)]);
    phase_of.push_back((b + 0.5) / bins);
  }
  const double dc = mean_of(avg);
  const int k_max = std::max(1, std::min(harmonics, (static_cast<int>(avg.size()) - 1) / 2));
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> ca(static_cast<std::size_t>(k_max) + 1, 0.0), cb(static_cast<std::size_t>(k_max) + 1, 0.0);
  const double n = static_cast<double>(avg.size());
  for (int k = 1; k <= k_max; ++k) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < avg.size(); ++i) {
      a += (avg[i] - dc) * std::cos(two_pi * k * phase_of[i]);
      b += (avg[i] - dc) * std::sin(two_pi * k * phase_of[i]);
    }
    const double x = std::numbers::pi * k / bins;
    const double undo = x / std::sin(x);
    ca[static_cast<std::size_t>(k)] = 2.0 * a / n * undo;
    cb[static_cast<std::size_t>(k)] = 2.0 * b / n * undo;
  }
  double lo = 0.0, hi = 0.0;
  constexpr int kGrid = 512;
  for (int g = 0; g < kGrid; ++g) {
    const double ph = static_cast<double>(g) / kGrid;
    double v = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      v += ca[static_cast<std::size_t>(k)] * std::cos(two_pi * k * ph) +
           cb[static_cast<std::size_t>(k)] * std::sin(two_pi * k * ph);
    }
    if (g == 0 || v < lo) lo = v;
    if (g == 0 || v > hi) hi = v;
  }
  return {dc, 0.5 * (hi - lo)};
}

}  // namespace

std::optional<double> estimate_period(std::span<const double> window, std::size_t max_lag) {
  if (window.size() < 8) return std::nullopt;
  const auto x = centered(window);
  const std::span<const double> xs(x);
  const std::size_t limit = std::min(max_lag + 1, x.size() / 2);
  const double ac0 = autocorr(xs, 0);
  if (!(ac0 > 1e-18)) return std::nullopt;

  std::vector<double> ac(limit + 2, 0.0);
  for (std::size_t k = 0; k < ac.size() && k < x.size(); ++k) ac[k] = autocorr(xs, k);

  std::optional<double> period;
  for (std::size_t k = 2; k + 1 < ac.size() && k <= limit; ++k) {
    if (ac[k] > 0.5 * ac0 && ac[k] >= ac[k - 1] && ac[k] >= ac[k + 1]) {
      period = parabolic_peak(static_cast<double>(k), ac[k - 1], ac[k], ac[k + 1]);
      break;
    }
  }
  if (!period) return std::nullopt;

  // Refine on successively doubled multiples of the period.
  double p = *period;
  for (double m = 2.0; m * p + 3.0 < static_cast<double>(x.size()) / 2.0; m *= 2.0) {
    const auto center = static_cast<std::size_t>(std::llround(m * p));
    std::size_t best = center;
    double best_val = autocorr(xs, center);
    for (std::size_t lag = center - 2; lag <= center + 2; ++lag) {
      const double v = autocorr(xs, lag);
      if (v > best_val) {
        best_val = v;
        best = lag;
      }
    }
    if (best == center - 2 || best == center + 2) break;  // peak not bracketed; keep the coarser estimate
    const double refined = parabolic_peak(static_cast<double>(best), autocorr(xs, best - 1), best_val,
                                          autocorr(xs, best + 1));
    p = refined / m;
  }
  if (p < 2.0 || p > static_cast<double>(window.size()) / 2.0) return std::nullopt;
  return p;
}

UnitStats unit_stats(std::span<const double> window, const UnitStatsOptions& options) {
  if (window.size() < options.min_window) {
    throw InvalidArgument("unit_stats window of " + std::to_string(window.size()) + " samples is shorter than " +
                          std::to_string(options.min_window));
  }
  UnitStats s;
  s.period_samples = estimate_period(window, options.max_lag);
  if (s.period_samples) {
    const auto [dc, amp] = folded_stats(window, *s.period_samples, options.harmonics);
    s.dc_offset = dc;
    s.osc_amplitude = amp;
  } else {
    s.dc_offset = mean_of(window);
    const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
    s.osc_amplitude = window.empty() ? 0.0 : 0.5 * (*hi - *lo);
  }
  return s;
}

double short_window_amplitude(std::span<const double> window) {
  if (window.empty()) return 0.0;
  const double m = mean_of(window);
  double acc = 0.0;
  for (double v : window) acc += std::abs(v - m);
  return 0.5 * std::numbers::pi * acc / static_cast<double>(window.size());
}

EnvelopeFrames amplitude_envelope(std::span<const double> series, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0) throw InvalidArgument("envelope window and hop must be positive");
  EnvelopeFrames env;
  env.window = window;
  env.hop = hop;
  for (std::size_t start = 0; start + window <= series.size(); start += hop) {
    env.amplitude.push_back(short_window_amplitude(series.subspan(start, window)));
  }
  return env;
}

// ---------------------------------------------------------------------------

double expected_period_samples(double pitch, int harmonic_spacing, int sample_rate) {
  return sample_rate / (param_to_freq(pitch) * std::max(1, harmonic_spacing));
}

std::optional<double> PitchLockReport::lock_fraction(int layer, double pitch) const {
  std::size_t osc = 0, locked = 0;
  for (const auto& r : rows) {
    if (r.layer != layer || r.pitch != pitch || !r.oscillating) continue;
    ++osc;
    if (r.locked) ++locked;
  }
  if (osc == 0) return std::nullopt;
  return static_cast<double>(locked) / static_cast<double>(osc);
}

std::size_t PitchLockReport::oscillating_count(int layer, double pitch) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const PitchLockRow& r) {
    return r.layer == layer && r.pitch == pitch && r.oscillating;
  }));
}

PitchLockReport pitch_locking_report(const NetworkParams& params, std::span<const double> pitches,
                                     const PitchLockOptions& o) {
  PitchLockReport report;
  const double duration = o.onset + o.settle + o.window;
  const auto begin = static_cast<std::size_t>(std::llround((o.onset + o.settle) * kSampleRate));
  for (double pitch : pitches) {
    const auto schedule = note_schedule(pitch, o.volume, o.instrument, o.onset);
    RenderOptions ro;
    ro.prime_seed = o.prime_seed;
    ro.capture = true;
    const auto rendered = render(params, schedule, duration, ro);
    const auto& trace = *rendered.trace;
    const double expected = expected_period_samples(pitch, o.harmonic_spacing);
    for (int layer = 0; layer < trace.n_layers; ++layer) {
      for (int unit = 0; unit < trace.hidden; ++unit) {
        const auto series = trace.unit_series(layer, unit, begin, trace.n_samples());
        PitchLockRow row;
        row.pitch = pitch;
        row.expected_period = expected;
        row.layer = layer;
        row.unit = unit;
        row.stats = unit_stats(series, o.stats);
        row.oscillating = row.stats.osc_amplitude >= o.min_amplitude;
        row.locked = row.oscillating && row.stats.period_samples &&
                     std::abs(*row.stats.period_samples - expected) <= o.tolerance * expected;
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string to_string(SelectivityClass c) {
  switch (c) {
    case SelectivityClass::silent: return "silent";
    case SelectivityClass::low: return "low";
    case SelectivityClass::mid: return "mid";
    case SelectivityClass::high: return "high";
    case SelectivityClass::broad: return "broad";
  }
  return "unknown";
}

std::vector<double> binned_amplitude(std::span<const double> series, std::span<const double> volume, int bins,
                                     double v_min, double v_max, const UnitStatsOptions& options) {
  if (series.size() != volume.size()) throw InvalidArgument("series and volume track differ in length");
  if (bins < 1 || !(v_max > v_min)) throw InvalidArgument("invalid volume binning");
  std::vector<std::vector<double>> members(static_cast<std::size_t>(bins));
  const double width = (v_max - v_min) / bins;
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double v = volume[t];
    if (v < v_min || v > v_max) continue;
    const auto b = std::min(bins - 1, static_cast<int>((v - v_min) / width));
    members[static_cast<std::size_t>(b)].push_back(series[t]);
  }
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t b = 0; b < members.size(); ++b) {
    const auto& m = members[b];
    if (m.empty()) continue;
    if (m.size() >= options.min_window) {
      out[b] = unit_stats(m, options).osc_amplitude;
    } else {
      const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
      out[b] = 0.5 * (*hi - *lo);
    }
  }
  return out;
}

SelectivityProfile summarize_profile(std::vector<double> amplitude, double silent_amplitude) {
  SelectivityProfile p;
  p.amplitude = std::move(amplitude);
  if (p.amplitude.empty()) return p;
  const auto peak = std::max_element(p.amplitude.begin(), p.amplitude.end());
  p.peak_bin = static_cast<int>(peak - p.amplitude.begin());
  const double half = 0.5 * *peak;
  double mass = 0.0, moment = 0.0;
  for (std::size_t b = 0; b < p.amplitude.size(); ++b) {
    if (p.amplitude[b] >= half) ++p.bandwidth;
    mass += p.amplitude[b];
    moment += p.amplitude[b] * static_cast<double>(b);
  }
  p.centroid = mass > 0.0 ? moment / mass : 0.0;
  const double n = static_cast<double>(p.amplitude.size());
  if (*peak < silent_amplitude) {
    p.cls = SelectivityClass::silent;
  } else if (p.bandwidth >= static_cast<int>(std::ceil(0.6 * n))) {
    p.cls = SelectivityClass::broad;
  } else if (p.centroid < n / 3.0) {
    p.cls = SelectivityClass::low;
  } else if (p.centroid < 2.0 * n / 3.0) {
    p.cls = SelectivityClass::mid;
  } else {
    p.cls = SelectivityClass::high;
  }
  return p;
}

double profile_rms_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("profiles differ in length");
  double diff = 0.0, ra = 0.0, rb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ra += a[i] * a[i];
    rb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(ra, rb));
  return scale > 0.0 ? std::sqrt(diff) / scale : 0.0;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("pearson needs equal, non-empty inputs");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

const SelectivityProfile& SelectivityReport::profile(bool rising, int layer, int unit, int hidden) const {
  const auto& v = rising ? up : down;
  return v.at(static_cast<std::size_t>(layer) * hidden + unit);
}

double SelectivityReport::volume_correlation(int layer, int unit, int hidden) const {
  return pearson(bin_centers, profile(true, layer, unit, hidden).amplitude);
}

SelectivityReport selectivity_profiles(const NetworkParams& params, const SweepSpec& spec) {
  std::vector<ControlEvent> events =
      volume_ramp(0.0, spec.duration_up, spec.v_min, spec.v_max, spec.pitch, spec.instrument);
  const auto turn = static_cast<std::size_t>(std::llround(spec.duration_up * kSampleRate));
  for (const auto& e : volume_ramp(spec.duration_up, spec.duration_up + spec.duration_down, spec.v_max, spec.v_min,
                                   spec.pitch, spec.instrument)) {
    events.push_back(e);
  }
  RenderOptions ro;
  ro.capture = true;
  ro.prime_seed = spec.prime_seed;
  const auto rendered = render(params, ControlSchedule(std::move(events)), spec.duration_up + spec.duration_down, ro);
  const auto& trace = *rendered.trace;
  const auto& volume = trace.controls.volume;

  SelectivityReport report;
  const double width = (spec.v_max - spec.v_min) / spec.bins;
  for (int b = 0; b < spec.bins; ++b) report.bin_centers.push_back(spec.v_min + (b + 0.5) * width);

  const std::span<const double> vol_up(volume.data(), turn);
  const std::span<const double> vol_down(volume.data() + turn, volume.size() - turn);
  for (int layer = 0; layer < trace.n_layers; ++layer) {
    for (int unit = 0; unit < trace.hidden; ++unit) {
      const auto series = trace.unit_series(layer, unit);
      const std::span<const double> s(series);
      auto up = summarize_profile(
          binned_amplitude(s.first(turn), vol_up, spec.bins, spec.v_min, spec.v_max, spec.stats),
          spec.silent_amplitude);
      auto down = summarize_profile(
          binned_amplitude(s.subspan(turn), vol_down, spec.bins, spec.v_min, spec.v_max, spec.stats),
          spec.silent_amplitude);
      up.layer = down.layer = layer;
      up.unit = down.unit = unit;
      up.rising = true;
      down.rising = false;
      report.up.push_back(std::move(up));
      report.down.push_back(std::move(down));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> reaction_time(std::span<const double> series, std::size_t edge, std::size_t segment_end,
                                         const TransientOptions& o) {
  segment_end = std::min(segment_end, series.size());
  if (edge >= segment_end) return std::nullopt;
  const auto env = amplitude_envelope(series, o.window, o.hop);
  const std::size_t half = o.window / 2;

  // Baseline: up to four frames lying entirely before the edge.
  double base = 0.0;
  int base_n = 0;
  for (std::size_t f = env.amplitude.size(); f-- > 0 && base_n < 4;) {
    if (f * o.hop + o.window <= edge) {
      base += env.amplitude[f];
      ++base_n;
    }
  }
  if (base_n == 0) return std::nullopt;
  base /= base_n;

  // Eventual level: frames inside the last third of the segment.
  const std::size_t settle_from = edge + 2 * (segment_end - edge) / 3;
  double eventual = 0.0;
  int ev_n = 0;
  for (std::size_t f = 0; f < env.amplitude.size(); ++f) {
    const std::size_t start = f * o.hop;
    if (start >= settle_from && start + o.window <= segment_end) {
      eventual += env.amplitude[f];
      ++ev_n;
    }
  }
  if (ev_n == 0) return std::nullopt;
  eventual /= ev_n;

  const double change = eventual - base;
  if (std::abs(change) < o.min_change) return std::nullopt;
  for (std::size_t f = 0; f < env.amplitude.size(); ++f) {
    const std::size_t center = f * o.hop + half;
    if (center < edge) continue;
    if (center >= segment_end) break;
    const double moved = env.amplitude[f] - base;
    if (moved * change > 0.0 && std::abs(moved) > 0.5 * std::abs(change)) return center - edge;
  }
  return std::nullopt;
}

TransientMap transient_response_map(const NetworkParams& params, const Preset& preset, int layer,
                                    const TransientOptions& options, std::uint64_t prime_seed) {
  RenderOptions ro;
  ro.capture = true;
  ro.prime_seed = prime_seed;
  auto rendered = render(params, preset.schedule, preset.duration, ro);

  TransientMap map;
  map.trace = std::move(*rendered.trace);
  map.audio = std::move(rendered.audio);
  map.edges = preset.edges;
  map.layer = layer < 0 ? map.trace.n_layers - 1 : layer;
  if (map.layer >= map.trace.n_layers) throw InvalidArgument("transient map layer out of range");
  const auto& volume = map.trace.controls.volume;
  for (std::size_t e : map.edges) {
    const bool rising = e < volume.size() && e > 0 && volume[e] > volume[e - 1];
    map.edge_rising.push_back(rising);
  }

  for (int unit = 0; unit < map.trace.hidden; ++unit) {
    const auto series = map.trace.unit_series(map.layer, unit);
    map.envelopes.push_back(amplitude_envelope(series, options.window, options.hop));
    UnitReaction r;
    r.layer = map.layer;
    r.unit = unit;
    for (std::size_t k = 0; k < map.edges.size(); ++k) {
      const std::size_t end = k + 1 < map.edges.size() ? map.edges[k + 1] : series.size();
      const auto rt = reaction_time(series, map.edges[k], end, options);
      r.reactions.push_back(rt);
      if (rt && *rt <= options.immediate) {
        if (map.edge_rising[k]) {
          ++map.immediate_onset;
        } else {
          ++map.immediate_offset;
        }
      }
    }
    map.reactions.push_back(std::move(r));
  }
  return map;
}

}  // namespace tsynth
