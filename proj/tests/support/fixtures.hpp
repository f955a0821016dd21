#pragma once

#include "transientsynth/network.hpp"

namespace fixture {

inline constexpr int kLoudCode = 200;
inline constexpr int kQuietCode = 128;

// Hand-built weights: unit 0 of every layer follows sign(volume - 0.5) within
// the same step (update gate pinned shut), and the output picks code 200 when
// it is positive, 128 otherwise.
inline tsynth::NetworkParams volume_gated(const tsynth::NetworkConfig& cfg = {}) {
  auto p = tsynth::NetworkParams::zeros(cfg);
  p.input.weight(0, 2) = 10.0;  // volume
  p.input.bias(0) = -5.0;
  for (auto& l : p.layers) {
    l.w_h(0, 0) = 10.0;
    l.b_z.setConstant(-30.0);
  }
  p.output.weight(kLoudCode, 0) = 10.0;
  p.output.bias(kQuietCode) = 1.0;
  return p;
}

}  // namespace fixture
