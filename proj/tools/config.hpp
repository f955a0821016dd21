#pragma once

#include <filesystem>
#include <string_view>

#include "transientsynth/synthdata.hpp"
#include "transientsynth/training.hpp"

namespace tsynth::cli {

// JSON run configuration. Every key is optional:
//
//   {
//     "network": {"n_layers": 4, "hidden": 40},
//     "dataset": {"n_pitches": 13, "n_volumes": 25, "max_volume": 0.7,
//                 "lead": 0.1, "steady": 0.25, "tail": 0.1, "base_fraction": 0.0},
//     "train":   {"learning_rate": 1e-3, "bptt_window": 256, "batch_size": 8,
//                 "max_epochs": 100, "seed": 1, "gradient_clip": 5.0,
//                 "final_learning_rate": 0, "checkpoint_every": 0}
//   }
struct RunConfig {
  DatasetConfig dataset;
  TrainConfig train;
};

// Keys present in the file override `base`.
RunConfig parse_run_config(std::string_view json_text, RunConfig base = {});
RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {});

// The reduced grid used for overfit runs: 3 pitches x 3 volumes, short segments.
RunConfig reduced_run_config();

}  // namespace tsynth::cli
