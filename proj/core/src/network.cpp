#include "transientsynth/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

Matrix zero_matrix(int rows, int cols) { return Matrix::Zero(rows, cols); }

template <class T>
std::span<double> as_span(T& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

template <class T>
std::span<const double> as_span(const T& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn(p.input.weight);
  fn(p.input.bias);
  for (auto& l : p.layers) {
    fn(l.w_z);
    fn(l.w_r);
    fn(l.w_h);
    fn(l.u_z);
    fn(l.u_r);
    fn(l.u_h);
    fn(l.b_z);
    fn(l.b_r);
    fn(l.b_h);
  }
  fn(p.output.weight);
  fn(p.output.bias);
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void xavier(Matrix& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * unit_uniform(rng) - 1.0) * limit;
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

void check_finite(const Vector& v, const char* what, int layer) {
  if (!v.allFinite()) {
    throw NumericError(std::string("non-finite ") + what + " in layer " + std::to_string(layer + 1));
  }
}

}  // namespace

void validate(const NetworkConfig& c) {
  if (c.n_layers < 1 || c.hidden < 1 || c.in_dim < 1 || c.out_dim < 1) {
    throw InvalidArgument("network dimensions must be positive");
  }
}

GruLayerParams GruLayerParams::zeros(int input_size, int hidden) {
  GruLayerParams l;
  l.w_z = l.w_r = l.w_h = zero_matrix(hidden, input_size);
  l.u_z = l.u_r = l.u_h = zero_matrix(hidden, hidden);
  l.b_z = l.b_r = l.b_h = Vector::Zero(hidden);
  return l;
}

NetworkParams NetworkParams::zeros(const NetworkConfig& config) {
  validate(config);
  NetworkParams p;
  p.config = config;
  p.input = {zero_matrix(config.hidden, config.in_dim), Vector::Zero(config.hidden)};
  for (int i = 0; i < config.n_layers; ++i) p.layers.push_back(GruLayerParams::zeros(config.hidden, config.hidden));
  p.output = {zero_matrix(config.out_dim, config.hidden), Vector::Zero(config.out_dim)};
  return p;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto s : tensors(*this)) n += s.size();
  return n;
}

std::size_t parameter_count(const NetworkConfig& c) {
  const std::size_t h = c.hidden;
  return c.n_layers * 3 * (2 * h * h + h) + (h * c.in_dim + h) + (c.out_dim * h + c.out_dim);
}

std::vector<std::span<double>> tensors(NetworkParams& params) {
  std::vector<std::span<double>> out;
  for_each_tensor(params, [&](auto& t) { out.push_back(as_span(t)); });
  return out;
}

std::vector<std::span<const double>> tensors(const NetworkParams& params) {
  std::vector<std::span<const double>> out;
  for_each_tensor(params, [&](const auto& t) { out.push_back(as_span(t)); });
  return out;
}

void validate(const NetworkParams& p) {
  validate(p.config);
  const auto& c = p.config;
  const auto shape = [](const auto& m, Eigen::Index r, Eigen::Index cols, const char* what) {
    if (m.rows() != r || m.cols() != cols) throw InvalidArgument(std::string("bad shape for ") + what);
  };
  shape(p.input.weight, c.hidden, c.in_dim, "input weight");
  shape(p.input.bias, c.hidden, 1, "input bias");
  if (static_cast<int>(p.layers.size()) != c.n_layers) throw InvalidArgument("layer count does not match config");
  for (const auto& l : p.layers) {
    shape(l.w_z, c.hidden, c.hidden, "w_z");
    shape(l.w_r, c.hidden, c.hidden, "w_r");
    shape(l.w_h, c.hidden, c.hidden, "w_h");
    shape(l.u_z, c.hidden, c.hidden, "u_z");
    shape(l.u_r, c.hidden, c.hidden, "u_r");
    shape(l.u_h, c.hidden, c.hidden, "u_h");
    shape(l.b_z, c.hidden, 1, "b_z");
    shape(l.b_r, c.hidden, 1, "b_r");
    shape(l.b_h, c.hidden, 1, "b_h");
  }
  shape(p.output.weight, c.out_dim, c.hidden, "output weight");
  shape(p.output.bias, c.out_dim, 1, "output bias");
  for (auto s : tensors(p)) {
    for (double v : s) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite parameter");
    }
  }
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  auto p = NetworkParams::zeros(config);
  std::mt19937_64 rng(seed);
  xavier(p.input.weight, rng);
  for (auto& l : p.layers) {
    for (Matrix* m : {&l.w_z, &l.w_r, &l.w_h, &l.u_z, &l.u_r, &l.u_h}) xavier(*m, rng);
  }
  xavier(p.output.weight, rng);
  return p;
}

HiddenState HiddenState::zeros(const NetworkConfig& config) {
  HiddenState s;
  s.layers.assign(config.n_layers, Vector::Zero(config.hidden));
  return s;
}

Vector gru_step(const GruLayerParams& l, const Vector& x, const Vector& h) {
  if (x.size() != l.input_size() || h.size() != l.hidden_size()) throw InvalidArgument("gru_step: dimension mismatch");
  const Vector z = (l.w_z * x + l.u_z * h + l.b_z).unaryExpr([](double a) { return sigmoid(a); });
  const Vector r = (l.w_r * x + l.u_r * h + l.b_r).unaryExpr([](double a) { return sigmoid(a); });
  const Vector rh = r.cwiseProduct(h);
  const Vector candidate = (l.w_h * x + l.u_h * rh + l.b_h).array().tanh().matrix();
  return (z.array() * h.array() + (1.0 - z.array()) * candidate.array()).matrix();
}

StepEvaluator::StepEvaluator(const NetworkConfig& c)
    : config_(c),
      frame_(c.in_dim),
      x0_(c.hidden),
      az_(c.hidden),
      ar_(c.hidden),
      an_(c.hidden),
      rh_(c.hidden),
      candidate_(c.hidden),
      logits_(c.out_dim) {
  validate(c);
}

const LogitVector& StepEvaluator::step(const NetworkParams& p, const ControlFrame& frame, HiddenState& state) {
  if (p.config != config_ || p.config.in_dim != 4) throw InvalidArgument("evaluator/params config mismatch");
  if (static_cast<int>(state.layers.size()) != config_.n_layers) throw InvalidArgument("hidden state layer count");
  frame_ << frame.audio_in, frame.pitch, frame.volume, frame.instrument;
  x0_.noalias() = p.input.weight * frame_;
  x0_ += p.input.bias;

  const Vector* input = &x0_;
  for (int i = 0; i < config_.n_layers; ++i) {
    const auto& l = p.layers[static_cast<std::size_t>(i)];
    Vector& h = state.layers[static_cast<std::size_t>(i)];
    az_.noalias() = l.w_z * *input;
    az_.noalias() += l.u_z * h;
    az_ += l.b_z;
    ar_.noalias() = l.w_r * *input;
    ar_.noalias() += l.u_r * h;
    ar_ += l.b_r;
    for (int k = 0; k < config_.hidden; ++k) {
      az_[k] = sigmoid(az_[k]);
      rh_[k] = sigmoid(ar_[k]) * h[k];
    }
    an_.noalias() = l.w_h * *input;
    an_.noalias() += l.u_h * rh_;
    an_ += l.b_h;
    for (int k = 0; k < config_.hidden; ++k) {
      const double cand = std::tanh(an_[k]);
      h[k] = az_[k] * h[k] + (1.0 - az_[k]) * cand;
    }
    check_finite(h, "activation", i);
    input = &h;
  }
  logits_.noalias() = p.output.weight * *input;
  logits_ += p.output.bias;
  if (!logits_.allFinite()) throw NumericError("non-finite logits");
  return logits_;
}

void StepEvaluator::copy_activations(const HiddenState& state, Activations& out) const {
  out.resize(static_cast<std::size_t>(config_.n_layers) * config_.hidden);
  std::size_t k = 0;
  for (const auto& h : state.layers) {
    for (Eigen::Index u = 0; u < h.size(); ++u) out[k++] = h[u];
  }
}

ForwardResult forward(const NetworkParams& params, const ControlFrame& frame, const HiddenState& state, bool capture) {
  StepEvaluator eval(params.config);
  ForwardResult result;
  result.state = state;
  result.logits = eval.step(params, frame, result.state);
  if (capture) {
    result.activations.emplace();
    eval.copy_activations(result.state, *result.activations);
  }
  return result;
}

Vector softmax(const LogitVector& logits) {
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).exp().matrix();
  p /= p.sum();
  return p;
}

}  // namespace tsynth
