#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "transientsynth/codec.hpp"

namespace tsynth {

// Parameters are stored row-major so that the flattened tensor order
// (used by checkpoints and the optimizer) is row by row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using LogitVector = Eigen::VectorXd;

struct NetworkConfig {
  int n_layers = 4;
  int hidden = 40;
  int in_dim = 4;
  int out_dim = kNumCodes;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Throws InvalidArgument for non-positive dimensions.
void validate(const NetworkConfig& config);

struct AffineParams {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// One GRU layer, Cho et al. form:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = z * h + (1 - z) * h~
struct GruLayerParams {
  Matrix w_z, w_r, w_h;  // hidden x input
  Matrix u_z, u_r, u_h;  // hidden x hidden
  Vector b_z, b_r, b_h;  // hidden

  static GruLayerParams zeros(int input_size, int hidden);
  int input_size() const { return static_cast<int>(w_z.cols()); }
  int hidden_size() const { return static_cast<int>(w_z.rows()); }
};

// input affine (no nonlinearity) -> n_layers x GRU -> output affine (logits).
struct NetworkParams {
  NetworkConfig config;
  AffineParams input;
  std::vector<GruLayerParams> layers;
  AffineParams output;

  static NetworkParams zeros(const NetworkConfig& config);
  std::size_t parameter_count() const;
};

// Closed form: n_layers*3*(2h^2 + h) + (h*in + h) + (out*h + out).
std::size_t parameter_count(const NetworkConfig& config);

// Every tensor in the canonical order: input.weight, input.bias, then per
// layer w_z w_r w_h u_z u_r u_h b_z b_r b_h, then output.weight, output.bias.
std::vector<std::span<double>> tensors(NetworkParams& params);
std::vector<std::span<const double>> tensors(const NetworkParams& params);

// Throws InvalidArgument if shapes disagree with the config or any entry is not finite.
void validate(const NetworkParams& params);

// Xavier-uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

struct HiddenState {
  std::vector<Vector> layers;

  static HiddenState zeros(const NetworkConfig& config);
  friend bool operator==(const HiddenState& a, const HiddenState& b) { return a.layers == b.layers; }
};

Vector gru_step(const GruLayerParams& layer, const Vector& x, const Vector& h);

// All hidden activations after one step, layer-major (layer 0 units first).
using Activations = std::vector<double>;

struct ForwardResult {
  LogitVector logits;
  HiddenState state;
  std::optional<Activations> activations;
};

// One time step of the whole stack. Throws NumericError naming the layer on
// a non-finite activation.
ForwardResult forward(const NetworkParams& params, const ControlFrame& frame, const HiddenState& state,
                      bool capture = false);

Vector softmax(const LogitVector& logits);

// Allocation-free single-step evaluator used by generation. Produces exactly
// the same bits as forward().
class StepEvaluator {
 public:
  explicit StepEvaluator(const NetworkConfig& config);

  // Advances `state` in place and returns the logits (valid until the next call).
  const LogitVector& step(const NetworkParams& params, const ControlFrame& frame, HiddenState& state);

  void copy_activations(const HiddenState& state, Activations& out) const;

 private:
  NetworkConfig config_;
  Vector frame_, x0_, az_, ar_, an_, rh_, candidate_;
  LogitVector logits_;
};

}  // namespace tsynth
