#pragma once

#include <cstddef>
#include <vector>

#include "transientsynth/synthdata.hpp"

namespace tsynth {

// Every hidden activation captured during a render, sample-major, together
// with the conditioning values that drove each sample. Layer and unit
// indices are 0-based here; exported files use 1-based labels.
struct ActivationTrace {
  int n_layers = 0;
  int hidden = 0;
  std::vector<double> values;  // [sample][layer * hidden + unit]
  ConditioningTracks controls;

  std::size_t n_samples() const { return controls.size(); }
  std::size_t width() const { return static_cast<std::size_t>(n_layers) * hidden; }
  double at(std::size_t sample, int layer, int unit) const {
    return values[sample * width() + static_cast<std::size_t>(layer) * hidden + unit];
  }
  std::vector<double> unit_series(int layer, int unit) const;
  std::vector<double> unit_series(int layer, int unit, std::size_t begin, std::size_t end) const;
};

}  // namespace tsynth
