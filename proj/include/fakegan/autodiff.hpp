#pragma once

// Reverse-mode differentiation over a recorded tape of array primitives.
//
// A Tape records every primitive application in evaluation order, which is
// a topological order by construction. backward() walks the records in
// reverse exactly once and accumulates gradients into every node that
// depends on a trainable leaf. Parameters are bound by reference: the bound
// Array must outlive the tape and must not change while the tape is in use.

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fakegan/array.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/kernels.hpp"

namespace fakegan::ad {

class Tape;

class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  inline const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Binds an external array as a leaf. Binding the same array twice returns
  // the same leaf, so reuse across time steps accumulates one gradient.
  Var param(const Array& p, bool trainable = true) {
    if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
    Node n;
    n.external = &p;
    n.needs_grad = trainable;
    n.leaf = true;
    nodes_.push_back(std::move(n));
    const std::size_t id = nodes_.size() - 1;
    params_.emplace(&p, id);
    return Var(this, id);
  }

  Var constant(Array a) {
    Node n;
    n.value = std::move(a);
    n.leaf = true;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  // Appends a primitive application. Inputs must already be on this tape.
  Var record(Array value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
      if (v.tape_ != this) throw ContractError("tape: input recorded on a different tape");
      n.inputs.push_back(v.id_);
      n.needs_grad = n.needs_grad || nodes_[v.id_].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Array& value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
  }
  const Array& value(Var v) const { return value(v.id_); }

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer of a node, allocated as zeros on first touch.
  Array& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != value(id).shape()) n.grad = Array(value(id).shape(), 0.0);
    return n.grad;
  }

  // Reverse accumulation from `out` seeded with `seed`. Gradients of any
  // previous backward pass are discarded first, so repeated calls on the
  // same tape give identical results.
  void backward(Var out, const Array& seed) {
    if (out.tape_ != this) throw ContractError("backward: output recorded on a different tape");
    if (seed.shape() != value(out).shape()) {
      throw DimensionError("backward: seed shape " + shape_string(seed.shape()) +
                           " does not match output " + shape_string(value(out).shape()));
    }
    for (Node& n : nodes_) n.grad = Array();
    grad_buffer(out.id_) = seed;
    for (std::size_t i = out.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.leaf || !n.backward || n.grad.empty()) continue;
      n.backward(*this, i);
    }
    backward_run_ = true;
  }

  void backward(Var out) {
    if (value(out).size() != 1) {
      throw ContractError("backward: implicit seed needs a scalar output, got " +
                          shape_string(value(out).shape()));
    }
    backward(out, Array(value(out).shape(), 1.0));
  }

  // Gradient w.r.t. any node; zeros if nothing flowed into it.
  Array grad(Var v) const {
    const Node& n = nodes_.at(v.id_);
    if (n.grad.empty()) return Array(value(v).shape(), 0.0);
    return n.grad;
  }

  // Gradient w.r.t. a bound parameter array.
  Array grad_of(const Array& param) const {
    auto it = params_.find(&param);
    if (it == params_.end()) throw LookupError("grad_of: parameter was not recorded on this tape");
    if (!backward_run_) throw LookupError("grad_of: backward has not been run");
    return grad(Var(const_cast<Tape*>(this), it->second));
  }

  bool has_param(const Array& param) const { return params_.count(&param) != 0; }

 private:
  struct Node {
    Array value;
    const Array* external = nullptr;
    std::vector<std::size_t> inputs;
    bool needs_grad = false;
    bool leaf = false;
    BackwardFn backward;
    Array grad;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Array*, std::size_t> params_;
  bool backward_run_ = false;
};

inline const Array& Var::value() const { return tape_->value(id_); }

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

inline void require_finite(const Array& a, const char* op) {
  if (!a.all_finite()) throw NumericDomainError(std::string(op) + ": non-finite result");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t in = t.input(self, k);
      if (!t.needs_grad(in)) continue;
      Array& gi = t.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a, b, "sub");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    if (t.needs_grad(ia)) {
      Array& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Array& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b, "mul");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    if (t.needs_grad(ia)) {
      const Array& vb = t.value(ib);
      Array& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      const Array& va = t.value(ia);
      Array& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

// scale * x + shift, elementwise with constant scalars.
inline Var affine(Var x, double scale, double shift) {
  Array out = x.value();
  for (double& v : out.values()) v = scale * v + shift;
  return x.tape().record(std::move(out), {x}, [scale](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    Array& gx = t.grad_buffer(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += scale * g[i];
  });
}

inline Var activate(Var x, Nonlinearity act) {
  Array out = x.value();
  for (double& v : out.values()) v = kernels::activate(act, v);
  return x.tape().record(std::move(out), {x}, [act](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    const Array& y = t.value(self);
    Array& gx = t.grad_buffer(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * kernels::activate_grad_from_output(act, y[i]);
    }
  });
}

inline Var sigmoid(Var x) { return activate(x, Nonlinearity::kSigmoid); }
inline Var tanh(Var x) { return activate(x, Nonlinearity::kTanh); }
inline Var relu(Var x) { return activate(x, Nonlinearity::kRelu); }

// ---------------------------------------------------------------------------
// Shape plumbing

inline Var slice(Var x, std::size_t offset, std::size_t length) {
  if (offset + length > x.size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") exceeds size " +
                         std::to_string(x.size()));
  }
  std::vector<double> out(x.value().storage().begin() + offset,
                          x.value().storage().begin() + offset + length);
  return x.tape().record(Array::vector(std::move(out)), {x},
                         [offset](Tape& t, std::size_t self) {
                           const Array& g = t.grad_buffer(self);
                           Array& gx = t.grad_buffer(t.input(self, 0));
                           for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                         });
}

inline Var reshape(Var x, Shape shape) {
  Array out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    Array& gx = t.grad_buffer(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Flat concatenation.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> out;
  for (const Var& p : parts) {
    out.insert(out.end(), p.value().storage().begin(), p.value().storage().end());
  }
  return parts.front().tape().record(
      Array::vector(std::move(out)), parts, [n = parts.size()](Tape& t, std::size_t self) {
        const Array& g = t.grad_buffer(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t in = t.input(self, k);
          const std::size_t len = t.value(in).size();
          if (t.needs_grad(in)) {
            Array& gi = t.grad_buffer(in);
            for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
          }
          offset += len;
        }
      });
}

// Rows of an n x E table selected by ids, as an ids.size() x E matrix.
inline Var gather_rows(Var table, std::vector<std::size_t> ids) {
  const Array& tv = table.value();
  if (tv.ndim() != 2) throw DimensionError("gather_rows: table must be a matrix");
  const std::size_t cols = tv.dim(1);
  Array out({ids.size(), cols});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.dim(0)) throw LookupError("gather_rows: row id out of range");
    std::copy(tv.row(ids[r]).begin(), tv.row(ids[r]).end(), out.row(r).begin());
  }
  return table.tape().record(std::move(out), {table},
                             [ids = std::move(ids), cols](Tape& t, std::size_t self) {
                               const Array& g = t.grad_buffer(self);
                               Array& gt = t.grad_buffer(t.input(self, 0));
                               for (std::size_t r = 0; r < ids.size(); ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   gt[ids[r] * cols + c] += g[r * cols + c];
                                 }
                               }
                             });
}

inline Var row(Var table, std::size_t id) {
  Var m = gather_rows(table, {id});
  return reshape(m, {table.value().dim(1)});
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

// W (m x n) times x (n).
inline Var matvec(Var w, Var x) {
  const Array& wv = w.value();
  const Array& xv = x.value();
  if (wv.ndim() != 2 || xv.size() != wv.dim(1)) {
    throw DimensionError("matvec: " + shape_string(wv.shape()) + " times " +
                         shape_string(xv.shape()));
  }
  const std::size_t rows = wv.dim(0), cols = wv.dim(1);
  Array out({rows}, 0.0);
  kernels::matvec_add(wv.values(), rows, cols, xv.values(), out.values());
  return w.tape().record(std::move(out), {w, x}, [rows, cols](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    const std::size_t iw = t.input(self, 0), ix = t.input(self, 1);
    if (t.needs_grad(iw)) {
      const Array& xv = t.value(ix);
      Array& gw = t.grad_buffer(iw);
      for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] == 0.0) continue;
        double* gr = gw.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gr[c] += g[r] * xv[c];
      }
    }
    if (t.needs_grad(ix)) {
      const Array& wv = t.value(iw);
      Array& gx = t.grad_buffer(ix);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = wv.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += g[r] * wr[c];
      }
    }
  });
}

inline Var dot(Var a, Var b) {
  detail::require_same_shape(a, b, "dot");
  const double v = kernels::dot(a.value().values(), b.value().values());
  return a.tape().record(Array::scalar(v), {a, b}, [](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    if (t.needs_grad(ia)) {
      const Array& vb = t.value(ib);
      Array& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < vb.size(); ++i) ga[i] += g * vb[i];
    }
    if (t.needs_grad(ib)) {
      const Array& va = t.value(ia);
      Array& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < va.size(); ++i) gb[i] += g * va[i];
    }
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape().record(Array::scalar(s), {x}, [](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    Array& gx = t.grad_buffer(t.input(self, 0));
    for (double& v : gx.values()) v += g;
  });
}

// Σ coeffs[k] * scalars[k].
inline Var weighted_sum(const std::vector<Var>& scalars, std::vector<double> coeffs) {
  if (scalars.empty() || scalars.size() != coeffs.size()) {
    throw DimensionError("weighted_sum: need equally many scalars and coefficients");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    if (scalars[k].size() != 1) throw DimensionError("weighted_sum: inputs must be scalars");
    s += coeffs[k] * scalars[k].value()[0];
  }
  return scalars.front().tape().record(
      Array::scalar(s), scalars, [coeffs = std::move(coeffs)](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
          const std::size_t in = t.input(self, k);
          if (t.needs_grad(in)) t.grad_buffer(in)[0] += coeffs[k] * g;
        }
      });
}

// ---------------------------------------------------------------------------
// Probability heads

inline Var softmax(Var logits) {
  Array out(logits.shape());
  kernels::softmax(logits.value().values(), out.values());
  return logits.tape().record(std::move(out), {logits}, [](Tape& t, std::size_t self) {
    const Array& g = t.grad_buffer(self);
    const Array& y = t.value(self);
    const double gy = kernels::dot(g.values(), y.values());
    Array& gx = t.grad_buffer(t.input(self, 0));
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - gy);
  });
}

// log softmax(logits)[index] as a scalar.
inline Var log_softmax_at(Var logits, std::size_t index) {
  const Array& lv = logits.value();
  if (index >= lv.size()) throw LookupError("log_softmax_at: index out of range");
  kernels::check_finite(lv.values(), "log_softmax_at");
  const double lse = kernels::log_sum_exp(lv.values());
  return logits.tape().record(
      Array::scalar(lv[index] - lse), {logits}, [index, lse](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        const std::size_t in = t.input(self, 0);
        const Array& lv = t.value(in);
        Array& gx = t.grad_buffer(in);
        for (std::size_t i = 0; i < lv.size(); ++i) gx[i] -= g * std::exp(lv[i] - lse);
        gx[index] += g;
      });
}

// Binary cross-entropy of sigmoid(logit) against a 0/1 target.
inline Var bce_with_logits(Var logit, double target) {
  if (logit.size() != 1) throw DimensionError("bce_with_logits: logit must be a scalar");
  const double z = logit.value()[0];
  const double loss = kernels::softplus(z) - target * z;
  return logit.tape().record(Array::scalar(loss), {logit}, [target](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    const std::size_t in = t.input(self, 0);
    t.grad_buffer(in)[0] += g * (kernels::sigmoid(t.value(in)[0]) - target);
  });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

// Bank of m valid convolutions over an L x E sequence. kernels is m x l x E
// (or l x E for a single kernel), bias has m entries. Output is m x (L-l+1),
// row f holding act(<kernel_f, window_i> + bias_f).
inline Var conv1d_valid(Var sequence, Var kernel_bank, Var bias, Nonlinearity act) {
  const Array& sv = sequence.value();
  const Array& kv = kernel_bank.value();
  if (sv.ndim() != 2) throw DimensionError("conv1d_valid: sequence must be L x E");
  const std::size_t length = sv.dim(0), emb = sv.dim(1);
  std::size_t filters = 1, window = 0;
  if (kv.ndim() == 3) {
    filters = kv.dim(0);
    window = kv.dim(1);
    if (kv.dim(2) != emb) throw DimensionError("conv1d_valid: kernel width != embedding size");
  } else if (kv.ndim() == 2) {
    window = kv.dim(0);
    if (kv.dim(1) != emb) throw DimensionError("conv1d_valid: kernel width != embedding size");
  } else {
    throw DimensionError("conv1d_valid: kernel must be l x E or m x l x E");
  }
  if (window == 0 || window > length) {
    throw DimensionError("conv1d_valid: window " + std::to_string(window) +
                         " exceeds sequence length " + std::to_string(length));
  }
  if (bias.size() != filters) throw DimensionError("conv1d_valid: need one bias per kernel");
  const std::size_t positions = length - window + 1;
  const std::size_t span_len = window * emb;
  Array out({filters, positions});
  for (std::size_t f = 0; f < filters; ++f) {
    const auto k = kv.values().subspan(f * span_len, span_len);
    for (std::size_t i = 0; i < positions; ++i) {
      const double z = kernels::dot(k, sv.values().subspan(i * emb, span_len)) + bias.value()[f];
      out.at(f, i) = kernels::activate(act, z);
    }
  }
  return sequence.tape().record(
      std::move(out), {sequence, kernel_bank, bias},
      [=](Tape& t, std::size_t self) {
        const Array& g = t.grad_buffer(self);
        const Array& y = t.value(self);
        const std::size_t is = t.input(self, 0), ik = t.input(self, 1), ib = t.input(self, 2);
        const Array& sv = t.value(is);
        const Array& kv = t.value(ik);
        const bool gs = t.needs_grad(is), gk = t.needs_grad(ik), gb = t.needs_grad(ib);
        Array* gseq = gs ? &t.grad_buffer(is) : nullptr;
        Array* gker = gk ? &t.grad_buffer(ik) : nullptr;
        Array* gbias = gb ? &t.grad_buffer(ib) : nullptr;
        for (std::size_t f = 0; f < filters; ++f) {
          for (std::size_t i = 0; i < positions; ++i) {
            const double gz =
                g.at(f, i) * kernels::activate_grad_from_output(act, y.at(f, i));
            if (gz == 0.0) continue;
            if (gbias) (*gbias)[f] += gz;
            for (std::size_t j = 0; j < span_len; ++j) {
              if (gker) (*gker)[f * span_len + j] += gz * sv[i * emb + j];
              if (gseq) (*gseq)[i * emb + j] += gz * kv[f * span_len + j];
            }
          }
        }
      });
}

// Row-wise maximum of an m x M map (or a length-M vector, giving one value).
// The gradient goes to the first maximal position of each row.
inline Var max_over_time(Var feature_map) {
  const Array& fv = feature_map.value();
  const std::size_t rows = fv.ndim() == 2 ? fv.dim(0) : 1;
  if (fv.empty()) throw DimensionError("max_over_time: empty feature map");
  const std::size_t cols = fv.size() / rows;
  Array out({rows});
  std::vector<std::size_t> where(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto rv = fv.values().subspan(r * cols, cols);
    where[r] = r * cols + kernels::argmax_first(rv);
    out[r] = fv[where[r]];
  }
  return feature_map.tape().record(std::move(out), {feature_map},
                                   [where = std::move(where)](Tape& t, std::size_t self) {
                                     const Array& g = t.grad_buffer(self);
                                     Array& gx = t.grad_buffer(t.input(self, 0));
                                     for (std::size_t r = 0; r < where.size(); ++r) {
                                       gx[where[r]] += g[r];
                                     }
                                   });
}

// ---------------------------------------------------------------------------
// Composite layers

struct LstmVars {
  Var wx;  // 4H x E
  Var wh;  // 4H x H
  Var b;   // 4H
};

// Gates stacked as [input, forget, output, candidate].
inline std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, const LstmVars& p) {
  const std::size_t hidden = h_prev.size();
  if (p.wx.value().ndim() != 2 || p.wx.value().dim(0) != 4 * hidden ||
      p.wx.value().dim(1) != x.size() || p.wh.value().ndim() != 2 ||
      p.wh.value().dim(0) != 4 * hidden || p.wh.value().dim(1) != hidden ||
      p.b.size() != 4 * hidden || c_prev.size() != hidden) {
    throw DimensionError("lstm_cell: parameter shapes inconsistent with x " +
                         shape_string(x.shape()) + " and hidden size " + std::to_string(hidden));
  }
  Var z = add(add(matvec(p.wx, x), matvec(p.wh, h_prev)), p.b);
  Var i = sigmoid(slice(z, 0, hidden));
  Var f = sigmoid(slice(z, hidden, hidden));
  Var o = sigmoid(slice(z, 2 * hidden, hidden));
  Var g = tanh(slice(z, 3 * hidden, hidden));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

struct HighwayVars {
  Var wt, bt;  // transform gate
  Var wh, bh;  // transform
};

inline Var highway_layer(Var x, const HighwayVars& p, Nonlinearity act = Nonlinearity::kRelu) {
  const std::size_t n = x.size();
  if (p.wt.value().shape() != Shape{n, n} || p.wh.value().shape() != Shape{n, n} ||
      p.bt.size() != n || p.bh.size() != n) {
    throw DimensionError("highway_layer: parameter shapes inconsistent with input size " +
                         std::to_string(n));
  }
  Var gate = sigmoid(add(matvec(p.wt, x), p.bt));
  Var transformed = activate(add(matvec(p.wh, x), p.bh), act);
  Var carry = affine(gate, -1.0, 1.0);
  return add(mul(gate, transformed), mul(carry, x));
}

}  // namespace fakegan::ad
