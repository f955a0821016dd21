#include "cli.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "config.hpp"
#include "transientsynth/checkpoint.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/export.hpp"
#include "transientsynth/probe.hpp"
#include "transientsynth/score.hpp"
#include "transientsynth/server.hpp"
#include "transientsynth/synthesis.hpp"
#include "transientsynth/tone_metrics.hpp"
#include "transientsynth/wav.hpp"

namespace tsynth::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string data;
  std::string preset;
  std::string score;
  std::string trace;
  std::string heatmap;
  std::string static_dir;
  std::string log;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool reduced = false;
  int epochs = -1;
  int layer = 4;
  int decimation = 16;
  int pitches = 0;
  double duration = 0.0;
  double temperature = 0.0;
  std::uint16_t port = kDefaultPort;
  std::string address = "0.0.0.0";
  std::uint64_t test_blocks = 0;
  std::uint64_t samples = 160000;
};

RunConfig load_config(const Options& o) {
  RunConfig rc = o.reduced ? reduced_run_config() : RunConfig{};
  if (!o.config.empty()) rc = read_run_config(o.config, rc);
  return rc;
}

NetworkParams load_params(const Options& o) {
  if (o.checkpoint.empty()) throw InvalidArgument("--checkpoint is required");
  return load_checkpoint(o.checkpoint);
}

int cmd_dataset_build(const Options& o, std::ostream& out) {
  const RunConfig rc = load_config(o);
  const auto manifest = build_dataset({synth_even(), synth_odd()}, rc.dataset, o.out);
  out << "wrote " << manifest.sequences.size() << " sequences to " << o.out << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig rc = load_config(o);
  if (o.seed_set) rc.train.seed = o.seed;
  if (o.epochs >= 0) rc.train.max_epochs = o.epochs;
  rc.train.checkpoint_path = o.out;
  if (!o.log.empty()) rc.train.log_path = o.log;
  fs::path manifest_path = o.data;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  const auto manifest = read_manifest(manifest_path);
  const auto result = train(manifest, rc.train, [&](const EpochRecord& r) {
    spdlog::info("epoch {} step {} loss {:.4f} ({:.1f} s)", r.epoch, r.step, r.mean_loss, r.wall_time);
  });
  if (!result.history.empty()) {
    out << "final loss " << result.history.back().mean_loss << " after " << result.history.size() << " epochs\n";
  }
  out << "checkpoint " << o.out << '\n';
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const auto params = load_params(o);
  ControlSchedule schedule;
  double duration = o.duration;
  if (!o.preset.empty()) {
    auto preset = find_preset(o.preset);
    if (!preset) throw InvalidArgument("unknown preset '" + o.preset + "'");
    schedule = preset->schedule;
    if (duration <= 0.0) duration = preset->duration;
  } else {
    schedule = read_score(o.score);
    if (duration <= 0.0) duration = schedule.last_time() + 0.5;
  }
  RenderOptions ro;
  ro.prime_seed = o.seed;
  ro.temperature = o.temperature;
  ro.capture = !o.trace.empty() || !o.heatmap.empty();
  const auto result = render(params, schedule, duration, ro);
  write_wav(o.out, std::span<const double>(result.audio), kSampleRate);
  out << "wrote " << result.audio.size() << " samples to " << o.out << '\n';
  if (!o.trace.empty()) {
    write_trace_csv(*result.trace, o.trace);
    out << "trace " << o.trace << '\n';
  }
  if (!o.heatmap.empty()) {
    if (o.layer < 1 || o.layer > result.trace->n_layers) throw InvalidArgument("--layer out of range");
    write_png(activation_heatmap(*result.trace, o.layer - 1, o.decimation), o.heatmap);
    out << "heatmap " << o.heatmap << '\n';
  }
  return kExitOk;
}

int cmd_probe(const Options& o, std::ostream& out) {
  const auto params = load_params(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const RunConfig rc = load_config(o);
  const int n_pitches = o.pitches > 0 ? o.pitches : rc.dataset.n_pitches;

  std::vector<double> pitches;
  for (int idx : grid_pitch_indices(n_pitches)) pitches.push_back(pitch_param(idx));
  PitchLockOptions plo;
  plo.prime_seed = o.seed;
  const auto lock = pitch_locking_report(params, pitches, plo);
  write_pitch_lock_csv(lock, dir / "pitch_lock.csv");
  for (double p : pitches) {
    const auto f = lock.lock_fraction(0, p);
    out << "pitch " << p << ": layer-1 oscillating " << lock.oscillating_count(0, p) << ", locked fraction "
        << (f ? std::to_string(*f) : std::string("n/a")) << '\n';
  }

  SweepSpec sweep;
  sweep.prime_seed = o.seed;
  const auto sel = selectivity_profiles(params, sweep);
  write_profiles_csv(sel, dir / "profiles.csv");

  for (const char* name : {"fig3b", "fig3c", "fig7"}) {
    const auto preset = find_preset(name);
    const auto map = transient_response_map(params, *preset, -1, {}, o.seed);
    write_reactions_csv(map, dir / (std::string(name) + "_reactions.csv"));
    const auto png = dir / (std::string(name) + "_layer" + std::to_string(map.layer + 1) + ".png");
    write_png(activation_heatmap(map.trace, map.layer, o.decimation), png);
    out << name << ": immediate onset units " << map.immediate_onset << ", immediate offset units "
        << map.immediate_offset << '\n';
  }
  out << "probe results in " << dir << '\n';
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  auto params = std::make_shared<const NetworkParams>(load_params(o));
  ServerOptions so;
  so.address = o.address;
  so.port = o.port;
  so.prime_seed = o.seed;
  if (!o.static_dir.empty()) so.static_dir = o.static_dir;
  if (!o.score.empty()) {
    so.test_mode = true;
    so.script = read_score(o.score);
    so.max_blocks = o.test_blocks;
  }
  Server server(params, so);
  out << "serving on " << o.address << ':' << (o.port ? std::to_string(o.port) : std::string("ephemeral")) << '\n';
  out.flush();
  server.run_until_signal();
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const NetworkParams params = o.checkpoint.empty() ? init_params(NetworkConfig{}, o.seed) : load_params(o);
  Generator gen(params, o.seed);
  const Controls c{0.5, 0.7, kInstrumentEven};
  // warm-up
  for (int i = 0; i < 1000; ++i) gen.step(c);
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t checksum = 0;
  for (std::uint64_t i = 0; i < o.samples; ++i) checksum += gen.step(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rate = static_cast<double>(o.samples) / secs;
  out << "steps/second: " << static_cast<long long>(rate) << '\n';
  out << "real-time factor: " << rate / kSampleRate << '\n';
  spdlog::debug("bench checksum {}", checksum);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"transientsynth: a small GRU that plays synthetic instruments one sample at a time",
               "transientsynth"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { o.seed = s, o.seed_set = true; }, "Random seed");
  };

  auto* dataset = app.add_subcommand("dataset", "Synthetic training data");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Render the instrument grid to WAV + control CSV");
  build->add_option("--out", o.out, "Output directory")->required();
  build->add_option("--config", o.config, "JSON run configuration");
  build->add_flag("--reduced", o.reduced, "3 pitches x 3 volumes with short segments");

  auto* train_cmd = app.add_subcommand("train", "Train a network on a dataset");
  train_cmd->add_option("--data", o.data, "Dataset directory or manifest.json")->required();
  train_cmd->add_option("--out", o.out, "Checkpoint to write")->required();
  train_cmd->add_option("--config", o.config, "JSON run configuration");
  train_cmd->add_flag("--reduced", o.reduced, "Use the reduced-grid training defaults");
  train_cmd->add_option("--epochs", o.epochs, "Override max_epochs");
  train_cmd->add_option("--log", o.log, "Append per-epoch CSV log here");
  add_seed(train_cmd);

  auto* render_cmd = app.add_subcommand("render", "Generate audio from a preset or control score");
  render_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  render_cmd->add_option("--out", o.out, "WAV output")->required();
  auto* preset_opt = render_cmd->add_option("--preset", o.preset, "fig3a|fig3b|fig3c|fig7|sweep")
                          ->check(CLI::IsMember(preset_names()));
  auto* score_opt = render_cmd->add_option("--score", o.score, "Control score file");
  preset_opt->excludes(score_opt);
  render_cmd->add_option("--duration", o.duration, "Seconds (default: preset length or score end + 0.5)");
  render_cmd->add_option("--trace", o.trace, "Write every activation as CSV");
  render_cmd->add_option("--heatmap", o.heatmap, "Write a layer heatmap PNG");
  render_cmd->add_option("--layer", o.layer, "Heatmap layer, 1-based")->capture_default_str();
  render_cmd->add_option("--decimation", o.decimation, "Samples per heatmap column")->capture_default_str();
  render_cmd->add_option("--temperature", o.temperature, "Sample instead of argmax (experimental)");
  add_seed(render_cmd);

  auto* probe_cmd = app.add_subcommand("probe", "Pitch locking, volume selectivity and transient maps");
  probe_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  probe_cmd->add_option("--out", o.out, "Output directory")->required();
  probe_cmd->add_option("--config", o.config, "JSON run configuration (for the pitch grid)");
  probe_cmd->add_option("--pitches", o.pitches, "Number of grid pitches to test");
  probe_cmd->add_option("--decimation", o.decimation, "Samples per heatmap column")->capture_default_str();
  add_seed(probe_cmd);

  auto* serve_cmd = app.add_subcommand("serve", "WebSocket live-play server");
  serve_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  serve_cmd->add_option("--port", o.port, "TCP port (0 = ephemeral)")->capture_default_str();
  serve_cmd->add_option("--address", o.address, "Listen address")->capture_default_str();
  serve_cmd->add_option("--static", o.static_dir, "Serve files from this directory over HTTP");
  auto* test_score = serve_cmd->add_option("--score", o.score, "Test mode: play this score unpaced to every client");
  serve_cmd->add_option("--test-blocks", o.test_blocks, "Blocks per connection in test mode")->needs(test_score);
  add_seed(serve_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "Measure generation throughput");
  bench_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint (default: random weights)");
  bench_cmd->add_option("--samples", o.samples, "Steps to time")->capture_default_str();
  add_seed(bench_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (serve_cmd->parsed() && !o.score.empty() && o.test_blocks == 0) {
    err << "error: --score needs --test-blocks\n\n" << app.help();
    return kExitUsage;
  }
  if (render_cmd->parsed() && o.preset.empty() && o.score.empty()) {
    err << "error: render needs --preset or --score\n\n" << render_cmd->help();
    return kExitUsage;
  }

  try {
    if (build->parsed()) return cmd_dataset_build(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (render_cmd->parsed()) return cmd_render(o, out);
    if (probe_cmd->parsed()) return cmd_probe(o, out);
    if (serve_cmd->parsed()) return cmd_serve(o, out);
    if (bench_cmd->parsed()) return cmd_bench(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace tsynth::cli
