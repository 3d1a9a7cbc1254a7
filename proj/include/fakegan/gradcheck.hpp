#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "fakegan/autodiff.hpp"
#include "fakegan/random.hpp"

namespace fakegan {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
}

inline double scalar_output(const ad::Var& out) {
  if (out.size() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got " +
                        shape_string(out.shape()));
  }
  return out.value()[0];
}

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace detail

// Compares the reverse-mode gradient of a scalar function at `point` with
// central differences. Relative error is |a - n| / max(|a|, |n|, 1e-8).
inline double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& function,
                         const Array& point, double epsilon = 1e-5) {
  detail::check_epsilon(epsilon);
  Array x = point;
  Array analytic;
  {
    ad::Tape tape;
    ad::Var out = function(tape, tape.param(x));
    detail::scalar_output(out);
    tape.backward(out);
    analytic = tape.grad_of(x);
  }
  auto eval = [&](const Array& at) {
    ad::Tape tape;
    return detail::scalar_output(function(tape, tape.param(at)));
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double up = eval(x);
    x[i] = saved - epsilon;
    const double down = eval(x);
    x[i] = saved;
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2 * epsilon)));
  }
  return worst;
}

// Same check for a model loss over a set of parameter arrays. `build` must
// bind every array in `params` on the tape it is given. When
// `max_coords_per_param` is nonzero, a seeded subset of coordinates of each
// array is checked.
inline GradCheckReport grad_check_params(const std::function<ad::Var(ad::Tape&)>& build,
                                         const std::vector<Array*>& params,
                                         double epsilon = 1e-5,
                                         std::size_t max_coords_per_param = 0,
                                         std::uint64_t seed = 0) {
  detail::check_epsilon(epsilon);
  std::vector<Array> analytic;
  {
    ad::Tape tape;
    ad::Var out = build(tape);
    detail::scalar_output(out);
    tape.backward(out);
    for (Array* p : params) analytic.push_back(tape.grad_of(*p));
  }
  auto eval = [&]() {
    ad::Tape tape;
    return detail::scalar_output(build(tape));
  };
  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Array& p = *params[k];
    std::vector<std::size_t> coords(p.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords_per_param && coords.size() > max_coords_per_param) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double saved = p[i];
      p[i] = saved + epsilon;
      const double up = eval();
      p[i] = saved - epsilon;
      const double down = eval();
      p[i] = saved;
      const double err = detail::relative_error(analytic[k][i], (up - down) / (2 * epsilon));
      report.max_relative_error = std::max(report.max_relative_error, err);
      ++report.coordinates;
    }
  }
  return report;
}

}  // namespace fakegan
