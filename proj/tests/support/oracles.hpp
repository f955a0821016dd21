#pragma once

// Independent reference implementations used as test oracles. Plain loops
// over std::vector, no Eigen, no code shared with the library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // rows

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec matvec(const Mat& m, const Vec& x) {
  Vec y(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
  return y;
}

struct Gru {
  Mat wz, wr, wh, uz, ur, uh;
  Vec bz, br, bh;
};

inline Vec gru_step(const Gru& g, const Vec& x, const Vec& h) {
  const std::size_t n = h.size();
  Vec z(n), r(n), out(n);
  const Vec wzx = matvec(g.wz, x), wrx = matvec(g.wr, x), whx = matvec(g.wh, x);
  const Vec uzh = matvec(g.uz, h), urh = matvec(g.ur, h);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sigmoid(wzx[i] + uzh[i] + g.bz[i]);
    r[i] = sigmoid(wrx[i] + urh[i] + g.br[i]);
  }
  Vec rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];
  const Vec uhrh = matvec(g.uh, rh);
  for (std::size_t i = 0; i < n; ++i) {
    const double cand = std::tanh(whx[i] + uhrh[i] + g.bh[i]);
    out[i] = z[i] * h[i] + (1.0 - z[i]) * cand;
  }
  return out;
}

struct Net {
  Mat w_in;
  Vec b_in;
  std::vector<Gru> layers;
  Mat w_out;
  Vec b_out;
};

// One step; returns logits and updates hs in place.
inline Vec forward(const Net& net, const Vec& x, std::vector<Vec>& hs) {
  Vec a = matvec(net.w_in, x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += net.b_in[i];
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    hs[l] = gru_step(net.layers[l], a, hs[l]);
    a = hs[l];
  }
  Vec y = matvec(net.w_out, a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += net.b_out[i];
  return y;
}

inline double log_softmax_at(const Vec& logits, std::size_t k) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return logits[k] - m - std::log(s);
}

// 4-term Blackman-Harris window (-92 dB sidelobes).
inline Vec blackman_harris(std::size_t n) {
  Vec w(n);
  const double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    w[i] = a0 - a1 * std::cos(x) + a2 * std::cos(2 * x) - a3 * std::cos(3 * x);
  }
  return w;
}

// Power of the windowed signal at an arbitrary frequency (direct DFT sum).
inline double tone_power(const Vec& x, const Vec& w, double freq_hz, double sample_rate) {
  std::complex<double> acc = 0.0;
  const double step = -2.0 * std::numbers::pi * freq_hz / sample_rate;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w[i] * std::polar(1.0, step * static_cast<double>(i));
  return std::norm(acc);
}

// Mu-law reference written directly from the companding formula.
inline double compress(double x) {
  x = std::fmax(-1.0, std::fmin(1.0, x));
  return (x < 0 ? -1.0 : 1.0) * std::log1p(255.0 * std::fabs(x)) / std::log1p(255.0);
}

inline double expand(double y) { return (y < 0 ? -1.0 : 1.0) * (std::pow(256.0, std::fabs(y)) - 1.0) / 255.0; }

inline double coefficient_of_determination(const Vec& x, const Vec& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy * sxy / (sxx * syy);
}

}  // namespace oracle
