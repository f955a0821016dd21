#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "tempdir.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/export.hpp"
#include "transientsynth/probe.hpp"

using namespace tsynth;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sine_fixture(std::size_t n, double amp, double dc, double freq, double noise_sigma = 0.0,
                                 std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(kTwoPi * freq * static_cast<double>(i) / kSampleRate) + dc;
    if (noise_sigma > 0.0) x[i] += noise_sigma * noise(rng);
  }
  return x;
}

// amplitude switches from a0 to a1 at `edge`
std::vector<double> step_fixture(std::size_t n, std::size_t edge, double a0, double a1, double period = 34.3) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (i < edge ? a0 : a1) * std::sin(kTwoPi * static_cast<double>(i) / period);
  return x;
}

double rel_err(double got, double want) { return std::fabs(got / want - 1.0); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("clean sinusoid: amplitude, dc and period") {
  const auto x = sine_fixture(4000, 0.3, 0.1, 466.16);
  const auto s = unit_stats(x);
  CHECK(rel_err(s.osc_amplitude, 0.3) <= 0.01);
  CHECK(rel_err(s.dc_offset, 0.1) <= 0.01);
  REQUIRE(s.period_samples);
  CHECK(std::fabs(*s.period_samples - 16000.0 / 466.16) <= 0.5);
}

TEST_CASE("SNR 20 dB sinusoid: amplitude, dc and period") {
  // signal power 0.3^2/2, noise power a hundredth of that. One second of
  // samples keeps the standard error of the mean near 0.17% of the offset.
  const double sigma = std::sqrt(0.3 * 0.3 / 2.0 / 100.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = sine_fixture(16000, 0.3, 0.1, 466.16, sigma, seed);
    const auto s = unit_stats(x);
    CHECK(rel_err(s.osc_amplitude, 0.3) <= 0.01);
    CHECK(rel_err(s.dc_offset, 0.1) <= 0.01);
    REQUIRE(s.period_samples);
    CHECK(std::fabs(*s.period_samples - 16000.0 / 466.16) <= 0.5);
  }
}

TEST_CASE("periods across the playable range") {
  for (int idx = 0; idx <= 12; ++idx) {
    const double f = param_to_freq(pitch_param(idx));
    const auto x = sine_fixture(3000, 0.5, -0.2, f);
    const auto p = estimate_period(x);
    REQUIRE(p);
    CHECK(std::fabs(*p - kSampleRate / f) <= 0.5);
  }
  // a non-sinusoidal waveform with a strong second harmonic
  std::vector<double> y(4000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double ph = kTwoPi * static_cast<double>(i) / 40.0;
    y[i] = 0.4 * std::sin(ph) + 0.35 * std::sin(2 * ph + 0.3);
  }
  const auto p = estimate_period(y);
  REQUIRE(p);
  CHECK(std::fabs(*p - 40.0) <= 0.5);
}

TEST_CASE("constant trace has no amplitude and no period") {
  const std::vector<double> c(1000, 0.42);
  const auto s = unit_stats(c);
  CHECK(s.osc_amplitude == 0.0);
  CHECK(s.dc_offset == doctest::Approx(0.42));
  CHECK_FALSE(s.period_samples);
  CHECK_THROWS_AS(unit_stats(std::vector<double>(100, 0.0)), InvalidArgument);
}

TEST_CASE("expected periods") {
  CHECK(expected_period_samples(0.5) == doctest::Approx(16000.0 / 466.16).epsilon(1e-4));
  CHECK(expected_period_samples(0.5) == doctest::Approx(34.3).epsilon(0.002));
  CHECK(expected_period_samples(0.0) == doctest::Approx(48.5).epsilon(0.002));
  CHECK(expected_period_samples(0.0, 2) == doctest::Approx(48.54 / 2).epsilon(0.002));
}

TEST_CASE("short-window amplitude of a sinusoid") {
  const auto x = sine_fixture(64 * 20, 0.25, 0.3, 500.0);  // 64 samples = 2 periods exactly
  CHECK(rel_err(short_window_amplitude(std::span(x).first(64)), 0.25) <= 0.01);
  const auto env = amplitude_envelope(x, 64, 16);
  CHECK(env.amplitude.size() == (x.size() - 64) / 16 + 1);
  CHECK(env.center(3) == 3 * 16 + 32);
}

TEST_CASE("reaction time on step-modulated sines") {
  const std::size_t n = 4000, edge = 1500;
  // immediate onset and offset
  for (auto [a0, a1] : {std::pair{0.05, 0.6}, std::pair{0.6, 0.05}, std::pair{0.0, 0.4}, std::pair{0.4, 0.0}}) {
    const auto x = step_fixture(n, edge, a0, a1);
    const auto rt = reaction_time(x, edge, n);
    REQUIRE(rt);
    CHECK(*rt <= 16);
  }
  // the unit itself switches 300 samples after the control edge
  for (std::size_t delay : {100u, 300u, 700u}) {
    const auto x = step_fixture(n, edge + delay, 0.1, 0.5);
    const auto rt = reaction_time(x, edge, n);
    REQUIRE(rt);
    CHECK(std::abs(static_cast<long>(*rt) - static_cast<long>(delay)) <= 16);
    const auto y = step_fixture(n, edge + delay, 0.5, 0.1);
    const auto rd = reaction_time(y, edge, n);
    REQUIRE(rd);
    CHECK(std::abs(static_cast<long>(*rd) - static_cast<long>(delay)) <= 16);
  }
  // flat and zero units never react
  CHECK_FALSE(reaction_time(std::vector<double>(n, 0.0), edge, n));
  CHECK_FALSE(reaction_time(step_fixture(n, edge, 0.3, 0.3), edge, n));
}

TEST_CASE("gaussian selectivity bump: peak bin exact, bandwidth within one bin") {
  const int bins = 20;
  const double v_max = 0.7, centre = 0.4, sigma = 0.07;
  const std::size_t n = 32000;
  std::vector<double> series(n), volume(n);
  for (std::size_t t = 0; t < n; ++t) {
    volume[t] = v_max * static_cast<double>(t) / static_cast<double>(n - 1);
    const double a = std::exp(-0.5 * std::pow((volume[t] - centre) / sigma, 2));
    series[t] = a * std::sin(kTwoPi * static_cast<double>(t) / 34.3);
  }
  const auto prof = summarize_profile(binned_amplitude(series, volume, bins, 0.0, v_max));
  const double width = v_max / bins;
  CHECK(prof.peak_bin == static_cast<int>(centre / width));
  // bins whose centre lies within the half-maximum half-width sigma*sqrt(2 ln 2)
  const double hw = sigma * std::sqrt(2.0 * std::log(2.0));
  int expected_bw = 0;
  for (int b = 0; b < bins; ++b) expected_bw += std::fabs((b + 0.5) * width - centre) <= hw;
  CHECK(std::abs(prof.bandwidth - expected_bw) <= 1);
  CHECK(prof.cls == SelectivityClass::mid);

  // a time-reversed sweep of the same unit gives the same profile
  std::vector<double> rs(series.rbegin(), series.rend()), rv(volume.rbegin(), volume.rend());
  const auto back = binned_amplitude(rs, rv, bins, 0.0, v_max);
  CHECK(profile_rms_difference(prof.amplitude, back) < 0.10);
}

TEST_CASE("profile classes") {
  std::vector<double> low(20, 0.0), high(20, 0.0), broad(20, 0.5), silent(20, 0.001);
  low[1] = low[2] = 0.5;
  high[18] = high[19] = 0.5;
  CHECK(summarize_profile(low).cls == SelectivityClass::low);
  CHECK(summarize_profile(high).cls == SelectivityClass::high);
  CHECK(summarize_profile(broad).cls == SelectivityClass::broad);
  CHECK(summarize_profile(silent).cls == SelectivityClass::silent);
  CHECK(to_string(SelectivityClass::mid) == "mid");
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1};
  CHECK(pearson(a, b) == doctest::Approx(1.0));
  CHECK(pearson(a, c) == doctest::Approx(-1.0));
  CHECK(profile_rms_difference(a, a) == 0.0);
}

TEST_CASE("model-level probes run on untrained weights") {
  const auto p = init_params(NetworkConfig{}, 3);
  const std::vector<double> pitches{0.0, 0.5};
  const auto lock = pitch_locking_report(p, pitches);
  CHECK(lock.rows.size() == 2 * 160);
  for (const auto& r : lock.rows) CHECK(r.expected_period == doctest::Approx(expected_period_samples(r.pitch)));
  (void)lock.lock_fraction(0, 0.5);  // no assertion on random weights

  SweepSpec sweep;
  sweep.duration_up = sweep.duration_down = 0.5;
  const auto sel = selectivity_profiles(p, sweep);
  CHECK(sel.up.size() == 160);
  CHECK(sel.down.size() == 160);
  CHECK(sel.bin_centers.size() == 20);
  CHECK(sel.profile(true, 2, 7, 40).unit == 7);
  CHECK(sel.profile(false, 2, 7, 40).layer == 2);

  auto preset = *find_preset("fig7");
  const auto map = transient_response_map(fixture::volume_gated(), preset);
  CHECK(map.layer == 3);
  CHECK(map.reactions.size() == 40);
  CHECK(map.edge_rising == std::vector<bool>{true, false});
  // the gated fixture has no oscillation: every unit is flat or a DC step
  for (const auto& r : map.reactions)
    for (const auto& rt : r.reactions) CHECK_FALSE(rt);
}

TEST_CASE("trace CSV round trip, header-only when empty, byte-stable") {
  TempDir dir("ts-export");
  const auto p = init_params(NetworkConfig{2, 3, 4, 16}, 5);
  RenderOptions o;
  o.capture = true;
  const auto r = render(p, note_schedule(0.5, 0.7, 0.0, 0.001), 0.004, o);
  write_trace_csv(*r.trace, dir / "t.csv");
  const auto back = read_trace_csv(dir / "t.csv");
  REQUIRE(back.n_layers == 2);
  REQUIRE(back.hidden == 3);
  REQUIRE(back.n_samples() == r.trace->n_samples());
  for (std::size_t i = 0; i < back.values.size(); ++i) REQUIRE(std::fabs(back.values[i] - r.trace->values[i]) <= 1e-9);
  const auto head = slurp(dir / "t.csv").substr(0, 64);
  CHECK(head.rfind("layer,unit,sample_index,activation\n1,1,0,", 0) == 0);

  write_trace_csv(*r.trace, dir / "t2.csv");
  CHECK(slurp(dir / "t.csv") == slurp(dir / "t2.csv"));

  ActivationTrace empty;
  empty.n_layers = 4;
  empty.hidden = 40;
  write_trace_csv(empty, dir / "e.csv");
  CHECK(slurp(dir / "e.csv") == "layer,unit,sample_index,activation\n");
}

TEST_CASE("stats and report CSVs") {
  TempDir dir("ts-export");
  std::vector<LabeledStats> stats{{0, 0, {0.1, 0.3, 34.3}}, {3, 39, {0.0, 0.0, std::nullopt}}};
  write_stats_csv(stats, dir / "s.csv");
  CHECK(slurp(dir / "s.csv") ==
        "layer,unit,dc,amplitude,period\n1,1,0.10000000000000001,0.29999999999999999,34.299999999999997\n4,40,0,0,\n");
}

TEST_CASE("heatmap dimensions and colours") {
  TempDir dir("ts-export");
  const auto p = init_params(NetworkConfig{}, 5);
  RenderOptions o;
  o.capture = true;
  const auto r = render(p, note_schedule(0.5, 0.7, 0.0, 0.01), 0.1, o);
  const auto img = activation_heatmap(*r.trace, 3, 16);
  CHECK(img.height == 40);
  CHECK(img.width == 1600 / 16);
  write_png(img, dir / "h.png");
  const auto bytes = slurp(dir / "h.png");
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(1, 3) == "PNG");
  std::uint8_t rr, g, b;
  diverging_color(0.0, rr, g, b);
  CHECK((rr == 255 && g == 255 && b == 255));
  diverging_color(1.0, rr, g, b);
  CHECK((rr == 255 && g == 0 && b == 0));
  diverging_color(-1.0, rr, g, b);
  CHECK((rr == 0 && g == 0 && b == 255));
  CHECK_THROWS_AS(activation_heatmap(*r.trace, 4, 16), InvalidArgument);
}
