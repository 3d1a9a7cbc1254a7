#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fakegan/array.hpp"
#include "fakegan/errors.hpp"

namespace fakegan {

// A named view of one learnable tensor inside a parameter struct.
struct TensorRef {
  std::string name;
  Array* array;
  bool trainable = true;
};

inline std::vector<Array*> trainable_arrays(const std::vector<TensorRef>& refs) {
  std::vector<Array*> out;
  for (const TensorRef& r : refs) {
    if (r.trainable) out.push_back(r.array);
  }
  return out;
}

inline double global_norm(const std::vector<Array>& grads) {
  double s = 0.0;
  for (const Array& g : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

// Rescales grads in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_by_global_norm(std::vector<Array>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Array& g : grads) {
      for (double& v : g.values()) v *= scale;
    }
  }
  return norm;
}

// params += rate * grads
inline void apply_step(const std::vector<Array*>& params, const std::vector<Array>& grads,
                       double rate) {
  if (params.size() != grads.size()) throw DimensionError("apply_step: arity mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(grads[k], params[k]->shape(), "apply_step");
    double* p = params[k]->data();
    for (std::size_t i = 0; i < grads[k].size(); ++i) p[i] += rate * grads[k][i];
  }
}

// Adaptive moment estimation (minimization).
class Adam {
 public:
  explicit Adam(double rate = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : rate_(rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Array*>& params, const std::vector<Array>& grads) {
    if (params.size() != grads.size()) throw DimensionError("Adam::step: arity mismatch");
    if (m_.empty()) {
      for (const Array* p : params) {
        m_.emplace_back(p->shape(), 0.0);
        v_.emplace_back(p->shape(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw DimensionError("Adam::step: parameter set changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      require_shape(grads[k], params[k]->shape(), "Adam::step");
      double* p = params[k]->data();
      double* m = m_[k].data();
      double* v = v_[k].data();
      const double* g = grads[k].data();
      for (std::size_t i = 0; i < grads[k].size(); ++i) {
        m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
        p[i] -= rate_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

  double rate() const noexcept { return rate_; }
  void set_rate(double r) noexcept { rate_ = r; }
  std::size_t steps() const noexcept { return t_; }

 private:
  double rate_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Array> m_, v_;
};

}  // namespace fakegan
