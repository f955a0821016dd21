#pragma once

#include "oracles.hpp"
#include "transientsynth/network.hpp"

namespace oracle {

inline Mat to_mat(const tsynth::Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Vec to_vec(const tsynth::Vector& v) { return Vec(v.data(), v.data() + v.size()); }

inline Gru to_gru(const tsynth::GruLayerParams& p) {
  return {to_mat(p.w_z), to_mat(p.w_r), to_mat(p.w_h), to_mat(p.u_z), to_mat(p.u_r),
          to_mat(p.u_h), to_vec(p.b_z), to_vec(p.b_r), to_vec(p.b_h)};
}

inline Net to_net(const tsynth::NetworkParams& p) {
  Net n{to_mat(p.input.weight), to_vec(p.input.bias), {}, to_mat(p.output.weight), to_vec(p.output.bias)};
  for (const auto& l : p.layers) n.layers.push_back(to_gru(l));
  return n;
}

}  // namespace oracle
