#include <chrono>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/synthesis.hpp"

using namespace tsynth;

namespace {

NetworkParams biased_output(std::initializer_list<std::pair<int, double>> bias) {
  auto p = NetworkParams::zeros(NetworkConfig{});
  for (auto [i, v] : bias) p.output.bias(i) = v;
  return p;
}

}  // namespace

TEST_CASE("prime draws one code and zero state") {
  const auto a = prime(NetworkConfig{}, 42);
  const auto b = prime(NetworkConfig{}, 42);
  CHECK(a.last_code == b.last_code);
  CHECK(a.sample_clock == 0);
  for (const auto& h : a.hidden.layers) CHECK(h.isZero());
  std::set<int> codes;
  for (std::uint64_t s = 0; s < 100; ++s) codes.insert(prime(NetworkConfig{}, s).last_code);
  CHECK(codes.size() >= 50);
}

TEST_CASE("argmax emission with lowest-index tie break") {
  LogitVector l = LogitVector::Zero(256);
  l(42) = 3.0;
  CHECK(argmax_code(l) == 42);
  l.setZero();
  l(3) = l(7) = 1.0;
  CHECK(argmax_code(l) == 3);
  l(100) = std::nan("");
  CHECK_THROWS_AS(argmax_code(l), NumericError);
}

TEST_CASE("step feeds the emitted code back as the next audio input") {
  const auto p = biased_output({{42, 5.0}});
  const auto s0 = prime(p.config, 1);
  auto [code, s1] = step(p, s0, {0.5, 0.7, 0.0});
  CHECK(code == 42);
  CHECK(s1.last_code == 42);
  CHECK(s1.sample_clock == 1);
  CHECK(make_frame(s1.last_code, {}).audio_in == doctest::Approx(42.0 / 255.0));

  const auto tie = biased_output({{3, 1.0}, {7, 1.0}});
  CHECK(step(tie, s0, {}).first == 3);

  const auto rnd = init_params(NetworkConfig{}, 3);
  const auto x = step(rnd, s0, {0.5, 0.7, 0.0});
  const auto y = step(rnd, s0, {0.5, 0.7, 0.0});
  CHECK(x.first == y.first);
  CHECK(x.second.hidden == y.second.hidden);
}

TEST_CASE("stateful generator equals repeated functional steps") {
  const auto p = init_params(NetworkConfig{}, 8);
  Generator gen(p, 5);
  auto s = prime(p.config, 5);
  for (int i = 0; i < 200; ++i) {
    const Controls c{0.5, i < 100 ? 0.0 : 0.7, 0.0};
    const auto [code, next] = step(p, s, c);
    REQUIRE(gen.step(c) == code);
    s = next;
  }
  CHECK(gen.state().hidden == s.hidden);
  CHECK(gen.state().sample_clock == 200);
}

TEST_CASE("generator clamps controls into [0, 1]") {
  const auto p = fixture::volume_gated();
  Generator a(p, 0), b(p, 0);
  CHECK(a.step({0.5, 3.0, -1.0}) == b.step({0.5, 1.0, 0.0}));
  CHECK(a.state().hidden == b.state().hidden);
}

TEST_CASE("temperature sampling is reproducible per seed") {
  const auto p = init_params(NetworkConfig{}, 4);
  Generator a(p, 1), b(p, 1);
  a.set_temperature(1.0, 99);
  b.set_temperature(1.0, 99);
  for (int i = 0; i < 100; ++i) REQUIRE(a.step({0.5, 0.5, 0.5}) == b.step({0.5, 0.5, 0.5}));
  std::mt19937_64 rng(1);
  LogitVector l = LogitVector::Constant(256, -1e9);
  l(17) = 0.0;
  CHECK(sample_code(l, 1.0, rng) == 17);
}

TEST_CASE("control schedule: hold last, zero before the first event") {
  const ControlSchedule s({{0.1, 0.5, 0.7, 0.0}, {0.2, 0.25, 0.0, 1.0}});
  CHECK(s.at(0.05).volume == 0.0);
  CHECK(s.at(0.05).pitch == 0.0);
  CHECK(s.at(0.1).volume == 0.7);
  CHECK(s.at(0.15).pitch == 0.5);
  CHECK(s.at(0.2).instrument == 1.0);
  CHECK(s.at(5.0).pitch == 0.25);
  ControlSchedule::Cursor cur(s);
  CHECK(cur.at_sample(0).volume == 0.0);
  CHECK(cur.at_sample(1599).volume == 0.0);
  CHECK(cur.at_sample(1600).volume == 0.7);
  CHECK(cur.at_sample(3200).instrument == 1.0);
  CHECK_THROWS_AS(ControlSchedule({{0.2, 0, 0, 0}, {0.1, 0, 0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(ControlSchedule({{0.0, 0, 1.5, 0}}), InvalidArgument);
}

TEST_CASE("render: length, hold semantics and determinism") {
  const auto p = fixture::volume_gated();
  const auto sched = note_schedule(0.5, 0.7, 0.0, 0.01, 0.02);
  const auto r = render(p, sched, 0.03);
  REQUIRE(r.codes.size() == 480);
  REQUIRE(r.audio.size() == 480);
  // volume takes effect exactly at the sample boundary of the event
  CHECK(r.codes[159] == fixture::kQuietCode);
  CHECK(r.codes[160] == fixture::kLoudCode);
  CHECK(r.codes[319] == fixture::kLoudCode);
  CHECK(r.codes[320] == fixture::kQuietCode);
  CHECK(r.audio[200] == mulaw_decode(fixture::kLoudCode));
  CHECK(r.controls.volume[200] == 0.7);
  CHECK(render(p, sched, 0.0).audio.empty());

  const auto q = init_params(NetworkConfig{}, 12);
  RenderOptions o;
  o.prime_seed = 4;
  const auto x = render(q, sched, 0.05, o);
  const auto y = render(q, sched, 0.05, o);
  CHECK(x.codes == y.codes);
  CHECK(x.audio == y.audio);
}

TEST_CASE("captured activations equal a forward re-run bit for bit") {
  const auto p = init_params(NetworkConfig{}, 21);
  RenderOptions o;
  o.capture = true;
  o.prime_seed = 9;
  const auto preset = find_preset("fig7");
  REQUIRE(preset);
  const auto r = render(p, preset->schedule, 0.05, o);
  REQUIRE(r.trace);
  const auto& tr = *r.trace;
  CHECK(tr.n_layers == 4);
  CHECK(tr.hidden == 40);
  REQUIRE(tr.n_samples() == r.codes.size());

  HiddenState s = HiddenState::zeros(p.config);
  MuLawCode prev = prime(p.config, 9).last_code;
  for (std::size_t t = 0; t < r.codes.size(); ++t) {
    const Controls c{tr.controls.pitch[t], tr.controls.volume[t], tr.controls.instrument[t]};
    const auto f = forward(p, make_frame(prev, c), s, true);
    for (int l = 0; l < 4; ++l)
      for (int u = 0; u < 40; ++u) REQUIRE(tr.at(t, l, u) == (*f.activations)[l * 40 + u]);
    REQUIRE(argmax_code(f.logits) == r.codes[t]);
    s = f.state;
    prev = r.codes[t];
  }
  const auto series = tr.unit_series(3, 5);
  CHECK(series.size() == tr.n_samples());
  CHECK(series[10] == tr.at(10, 3, 5));
}

TEST_CASE("presets carry the experiment parameters") {
  CHECK(preset_names() == std::vector<std::string>{"fig3a", "fig3b", "fig3c", "fig7", "sweep"});
  CHECK_FALSE(find_preset("nope"));

  const auto a = *find_preset("fig3a");
  CHECK(a.schedule.at(0.3).pitch == 0.5);
  CHECK(a.schedule.at(0.3).instrument == kInstrumentEven);
  // ramp 0 -> 0.7 over 400 ms
  const double start = 0.05, end = 0.45;
  CHECK(a.schedule.at(start).volume == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(a.schedule.at(start + 0.2).volume == doctest::Approx(0.35).epsilon(1e-3));
  CHECK(a.schedule.at(end).volume == doctest::Approx(0.7).epsilon(1e-3));
  double peak = 0.0;
  for (const auto& e : a.schedule.events()) peak = std::max(peak, e.volume);
  CHECK(peak == doctest::Approx(0.7));

  const auto b = *find_preset("fig3b");
  const auto c = *find_preset("fig3c");
  CHECK(b.schedule.at(0.1).instrument == kInstrumentEven);
  CHECK(c.schedule.at(0.1).instrument == kInstrumentOdd);
  CHECK(b.schedule.at(0.1).volume == 0.7);
  CHECK(b.edges.size() == 4);

  const auto f7 = *find_preset("fig7");
  CHECK(f7.schedule.at(0.1).pitch == 0.5);
  CHECK(f7.schedule.at(0.1).instrument == kInstrumentEven);
  CHECK(f7.schedule.at(0.01).volume == 0.0);
  CHECK(f7.schedule.at(0.1).volume == 0.8);
  CHECK(f7.schedule.at(0.5).volume == 0.0);
  CHECK(f7.edges.size() == 2);

  const auto sw = *find_preset("sweep");
  CHECK(sw.duration == doctest::Approx(4.0));
  CHECK(sw.schedule.at(2.0).volume == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("generation keeps up with real time") {
  const auto p = init_params(NetworkConfig{}, 1);
  Generator gen(p, 1);
  const int n = 32000;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) gen.step({0.5, 0.7, 0.0});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  INFO("steps/s ", n / secs);
  CHECK(n / secs >= 16000.0);
}
