#include "config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "transientsynth/errors.hpp"

namespace tsynth::cli {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& obj, const char* key, T& slot) {
  if (!obj.contains(key)) return;
  try {
    slot = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
  }
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const auto& s = root.at(name);
  if (!s.is_object()) throw InvalidArgument(std::string("config section '") + name + "' must be an object");
  return s;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, RunConfig base) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) throw InvalidArgument("config is not a JSON object");
  RunConfig rc = std::move(base);

  const auto& n = section(root, "network");
  take(n, "n_layers", rc.train.network.n_layers);
  take(n, "hidden", rc.train.network.hidden);

  const auto& d = section(root, "dataset");
  take(d, "n_pitches", rc.dataset.n_pitches);
  take(d, "n_volumes", rc.dataset.n_volumes);
  take(d, "max_volume", rc.dataset.max_volume);
  take(d, "lead", rc.dataset.timing.lead);
  take(d, "steady", rc.dataset.timing.steady);
  take(d, "tail", rc.dataset.timing.tail);
  take(d, "base_fraction", rc.dataset.base_fraction);

  const auto& t = section(root, "train");
  take(t, "learning_rate", rc.train.learning_rate);
  take(t, "bptt_window", rc.train.bptt_window);
  take(t, "batch_size", rc.train.batch_size);
  take(t, "max_epochs", rc.train.max_epochs);
  take(t, "seed", rc.train.seed);
  take(t, "beta1", rc.train.beta1);
  take(t, "beta2", rc.train.beta2);
  take(t, "epsilon", rc.train.epsilon);
  take(t, "gradient_clip", rc.train.gradient_clip);
  take(t, "final_learning_rate", rc.train.final_learning_rate);
  take(t, "checkpoint_every", rc.train.checkpoint_every);

  validate(rc.train);
  return rc;
}

RunConfig read_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

RunConfig reduced_run_config() {
  RunConfig rc;
  rc.dataset.n_pitches = 3;
  rc.dataset.n_volumes = 3;
  rc.dataset.timing = {0.02, 0.1, 0.02};
  // Small batches give more optimizer steps for the same compute, which is
  // what gets the net off the initial plateau sooner. How long the plateau
  // lasts depends a lot on the seed; 5 was the quickest of a short screen
  // (1-5, 120 epochs). ~25 min on one core.
  rc.train.learning_rate = 3e-3;
  rc.train.final_learning_rate = 1e-4;
  rc.train.batch_size = 3;
  rc.train.max_epochs = 1300;
  rc.train.seed = 5;
  return rc;
}

}  // namespace tsynth::cli
