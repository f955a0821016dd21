#include <benchmark/benchmark.h>

#include "transientsynth/synthdata.hpp"
#include "transientsynth/synthesis.hpp"
#include "transientsynth/training.hpp"

using namespace tsynth;

namespace {

const NetworkParams& model() {
  static const NetworkParams p = init_params(NetworkConfig{}, 1);
  return p;
}

void BM_GeneratorStep(benchmark::State& state) {
  Generator gen(model(), 1);
  const Controls c{0.5, 0.7, kInstrumentOdd};
  for (auto _ : state) benchmark::DoNotOptimize(gen.step(c));
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_GeneratorStep);

void BM_ForwardWithActivations(benchmark::State& state) {
  const auto& p = model();
  HiddenState h = HiddenState::zeros(p.config);
  const auto frame = make_frame(140, {0.5, 0.7, 0.0});
  for (auto _ : state) {
    auto f = forward(p, frame, h, true);
    h = f.state;
    benchmark::DoNotOptimize(f.logits.data());
  }
}
BENCHMARK(BM_ForwardWithActivations);

void BM_RenderFig7(benchmark::State& state) {
  const auto preset = *find_preset("fig7");
  RenderOptions o;
  o.capture = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(render(model(), preset.schedule, 0.25, o).codes.data());
  state.SetItemsProcessed(state.iterations() * 4000);
}
BENCHMARK(BM_RenderFig7)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One optimizer step on a batch of windows cut from real training data.
void BM_TrainingWindow(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int window = static_cast<int>(state.range(1));
  std::vector<TrainingSequence> seqs;
  for (int i = 0; i < batch; ++i) {
    const auto r = render_sequence(i % 2 ? synth_odd() : synth_even(), 6, 0.7, SegmentTiming{});
    seqs.push_back(frames_from_audio(r.audio, r.tracks));
  }
  std::vector<const TrainingSequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  const auto w = make_window(ptrs, 1000, window);
  TrainConfig cfg;
  TrainState ts = TrainState::fresh(model());
  const auto init = BatchState::zeros(model().config, batch);
  for (auto _ : state) {
    auto r = bptt_gradients(ts.params, w, init);
    optimizer_step(ts, std::move(r.gradients), cfg);
  }
  state.SetItemsProcessed(state.iterations() * batch * window);
}
BENCHMARK(BM_TrainingWindow)->Args({1, 256})->Args({3, 256})->Args({8, 256})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
