#pragma once

// Tape-free numeric kernels shared by the recorded primitives and the fast
// inference paths (sampling, rollout, scoring).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fakegan/array.hpp"
#include "fakegan/errors.hpp"

namespace fakegan {

enum class Nonlinearity { kIdentity, kTanh, kSigmoid, kRelu };

inline const char* to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kIdentity: return "identity";
    case Nonlinearity::kTanh: return "tanh";
    case Nonlinearity::kSigmoid: return "sigmoid";
    case Nonlinearity::kRelu: return "relu";
  }
  return "?";
}

inline Nonlinearity parse_nonlinearity(const std::string& s) {
  if (s == "identity") return Nonlinearity::kIdentity;
  if (s == "tanh") return Nonlinearity::kTanh;
  if (s == "sigmoid") return Nonlinearity::kSigmoid;
  if (s == "relu") return Nonlinearity::kRelu;
  throw ContractError("unknown nonlinearity '" + s + "'");
}

namespace kernels {

inline double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(Nonlinearity n, double x) {
  switch (n) {
    case Nonlinearity::kIdentity: return x;
    case Nonlinearity::kTanh: return std::tanh(x);
    case Nonlinearity::kSigmoid: return sigmoid(x);
    case Nonlinearity::kRelu: return x > 0 ? x : 0.0;
  }
  return x;
}

// Derivative expressed through the activation output y = activate(n, x).
inline double activate_grad_from_output(Nonlinearity n, double y) {
  switch (n) {
    case Nonlinearity::kIdentity: return 1.0;
    case Nonlinearity::kTanh: return 1.0 - y * y;
    case Nonlinearity::kSigmoid: return y * (1.0 - y);
    case Nonlinearity::kRelu: return y > 0 ? 1.0 : 0.0;
  }
  return 1.0;
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline void check_finite(std::span<const double> xs, const char* what) {
  for (double v : xs) {
    if (!std::isfinite(v)) throw NumericDomainError(std::string(what) + ": non-finite input");
  }
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : xs) m = std::max(m, v);
  double s = 0.0;
  for (double v : xs) s += std::exp(v - m);
  return m + std::log(s);
}

inline void softmax(std::span<const double> logits, std::span<double> out) {
  check_finite(logits, "softmax");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax(logits, out);
  return out;
}

// out += W x, W row-major rows x cols.
inline void matvec_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                       std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] += acc;
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// One LSTM step. Gate pre-activations are stacked [input, forget, output,
// candidate], each of size H: z = Wx x + Wh h_prev + b.
inline void lstm_step(std::span<const double> wx, std::span<const double> wh,
                      std::span<const double> b, std::size_t hidden, std::span<const double> x,
                      std::span<const double> h_prev, std::span<const double> c_prev,
                      std::span<double> h_out, std::span<double> c_out,
                      std::vector<double>& scratch) {
  const std::size_t g4 = 4 * hidden;
  scratch.assign(b.begin(), b.end());
  matvec_add(wx, g4, x.size(), x, scratch);
  matvec_add(wh, g4, hidden, h_prev, scratch);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double i = sigmoid(scratch[j]);
    const double f = sigmoid(scratch[hidden + j]);
    const double o = sigmoid(scratch[2 * hidden + j]);
    const double g = std::tanh(scratch[3 * hidden + j]);
    const double c = f * c_prev[j] + i * g;
    c_out[j] = c;
    h_out[j] = o * std::tanh(c);
  }
}

// Single-kernel valid convolution over a row-major L x E sequence with an
// l x E kernel: f_i = act(<kernel, seq[i .. i+l-1]> + bias).
inline std::vector<double> conv1d_valid(const Array& sequence, const Array& kernel, double bias,
                                        Nonlinearity act) {
  if (sequence.ndim() != 2 || kernel.ndim() != 2 || kernel.dim(1) != sequence.dim(1)) {
    throw DimensionError("conv1d_valid: expected L x E sequence and l x E kernel, got " +
                         shape_string(sequence.shape()) + " and " + shape_string(kernel.shape()));
  }
  const std::size_t length = sequence.dim(0);
  const std::size_t window = kernel.dim(0);
  const std::size_t emb = sequence.dim(1);
  if (window == 0 || window > length) {
    throw DimensionError("conv1d_valid: window " + std::to_string(window) +
                         " exceeds sequence length " + std::to_string(length));
  }
  std::vector<double> out(length - window + 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = dot(kernel.values(), sequence.values().subspan(i * emb, window * emb));
    out[i] = activate(act, z + bias);
  }
  return out;
}

// Index of the first maximum.
inline std::size_t argmax_first(std::span<const double> xs) {
  if (xs.empty()) throw DimensionError("max_over_time: empty feature map");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[best]) best = i;
  }
  return best;
}

inline double max_over_time(std::span<const double> xs) { return xs[argmax_first(xs)]; }

// y = T * H(x) + (1 - T) * x with T = sigmoid(Wt x + bt), H = act(Wh x + bh).
inline void highway(std::span<const double> wt, std::span<const double> bt,
                    std::span<const double> wh, std::span<const double> bh, Nonlinearity act,
                    std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  for (std::size_t r = 0; r < n; ++r) {
    const double t = sigmoid(bt[r] + dot(wt.subspan(r * n, n), x));
    const double h = activate(act, bh[r] + dot(wh.subspan(r * n, n), x));
    y[r] = t * h + (1.0 - t) * x[r];
  }
}

}  // namespace kernels
}  // namespace fakegan
