#pragma once

// Finite-difference checks over every autodiff primitive and the two full
// model losses. Used by `fakegan gradcheck` and the test suite.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fakegan/discriminator.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/gradcheck.hpp"
#include "fakegan/synth.hpp"

namespace fakegan {

struct GradCheckCase {
  std::string name;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

namespace detail {

inline Array random_array(Shape shape, Rng& rng, double scale = 1.0) {
  Array a(std::move(shape));
  for (double& v : a.values()) v = scale * rng.normal();
  return a;
}

// Values bounded away from zero (for relu kinks).
inline Array off_kink_array(Shape shape, Rng& rng) {
  Array a(std::move(shape));
  for (double& v : a.values()) {
    const double m = rng.uniform(0.1, 1.5);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return a;
}

// Distinct values at least 0.05 apart in every row (for max pooling).
inline Array separated_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Array a({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> vals(cols);
    for (std::size_t c = 0; c < cols; ++c) vals[c] = 0.1 * static_cast<double>(c) + rng.uniform(0, 0.05);
    rng.shuffle(vals.begin(), vals.end());
    for (std::size_t c = 0; c < cols; ++c) a.at(r, c) = vals[c];
  }
  return a;
}

// Reduces a tensor output to a scalar with fixed random weights.
inline ad::Var project(ad::Tape& t, ad::Var v, const Array& w) {
  return ad::dot(ad::reshape(v, {v.size()}), t.constant(w));
}

}  // namespace detail

using UnaryGraph = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Each primitive is checked with respect to each differentiable input in
// turn; the other inputs are held as constants.
inline std::vector<GradCheckCase> check_primitives(std::uint64_t seed, double eps = 1e-5) {
  using namespace ad;
  std::vector<GradCheckCase> out;
  Rng rng = Rng::stream(seed, {0x9c});
  auto run = [&](const std::string& name, const Array& point, const UnaryGraph& f) {
    out.push_back({name, seed, grad_check(f, point, eps), point.size()});
  };
  const std::size_t n = 5;
  const Array a = fakegan::detail::random_array({n}, rng), b = fakegan::detail::random_array({n}, rng);
  const Array w = fakegan::detail::random_array({n}, rng);
  auto proj = [](const Array& weights) {
    return [weights](Tape& t, Var v) { return fakegan::detail::project(t, v, weights); };
  };
  const auto pn = proj(w);

  run("add/lhs", a, [&](Tape& t, Var x) { return pn(t, add(x, t.constant(b))); });
  run("add/rhs", b, [&](Tape& t, Var x) { return pn(t, add(t.constant(a), x)); });
  run("sub/lhs", a, [&](Tape& t, Var x) { return pn(t, sub(x, t.constant(b))); });
  run("sub/rhs", b, [&](Tape& t, Var x) { return pn(t, sub(t.constant(a), x)); });
  run("mul/lhs", a, [&](Tape& t, Var x) { return pn(t, mul(x, t.constant(b))); });
  run("mul/rhs", b, [&](Tape& t, Var x) { return pn(t, mul(t.constant(a), x)); });
  run("mul/self", a, [&](Tape& t, Var x) { return pn(t, mul(x, x)); });
  run("affine", a, [&](Tape& t, Var x) { return pn(t, affine(x, -1.7, 0.3)); });
  run("sigmoid", a, [&](Tape& t, Var x) { return pn(t, sigmoid(x)); });
  run("tanh", a, [&](Tape& t, Var x) { return pn(t, tanh(x)); });
  run("relu", fakegan::detail::off_kink_array({n}, rng), [&](Tape& t, Var x) { return pn(t, relu(x)); });
  run("identity", a, [&](Tape& t, Var x) { return pn(t, activate(x, Nonlinearity::kIdentity)); });
  {
    const Array w3 = fakegan::detail::random_array({3}, rng);
    run("slice", a, [&](Tape& t, Var x) { return fakegan::detail::project(t, slice(x, 1, 3), w3); });
  }
  {
    const Array m = fakegan::detail::random_array({2, 3}, rng), wm = fakegan::detail::random_array({6}, rng);
    run("reshape", m, [&](Tape& t, Var x) { return fakegan::detail::project(t, reshape(x, {3, 2}), wm); });
  }
  {
    const Array wc = fakegan::detail::random_array({2 * n}, rng);
    run("concat", a, [&](Tape& t, Var x) {
      return fakegan::detail::project(t, concat({t.constant(b), x}), wc);
    });
    run("concat/repeat", a, [&](Tape& t, Var x) {
      return fakegan::detail::project(t, concat({x, x}), wc);
    });
  }
  {
    const Array table = fakegan::detail::random_array({4, 3}, rng), wg = fakegan::detail::random_array({15}, rng);
    run("gather_rows", table, [&](Tape& t, Var x) {
      return fakegan::detail::project(t, gather_rows(x, {2, 0, 2, 3, 1}), wg);
    });
    const Array w3 = fakegan::detail::random_array({3}, rng);
    run("row", table, [&](Tape& t, Var x) { return fakegan::detail::project(t, row(x, 2), w3); });
  }
  {
    const Array m = fakegan::detail::random_array({3, n}, rng), w3 = fakegan::detail::random_array({3}, rng);
    run("matvec/matrix", m, [&](Tape& t, Var x) { return fakegan::detail::project(t, matvec(x, t.constant(a)), w3); });
    run("matvec/vector", a, [&](Tape& t, Var x) { return fakegan::detail::project(t, matvec(t.constant(m), x), w3); });
  }
  run("dot/lhs", a, [&](Tape& t, Var x) { return dot(x, t.constant(b)); });
  run("dot/self", a, [&](Tape&, Var x) { return dot(x, x); });
  run("sum", a, [&](Tape& t, Var x) { return sum(mul(x, t.constant(b))); });
  run("weighted_sum", a, [&](Tape& t, Var x) {
    std::vector<Var> parts{dot(x, t.constant(b)), sum(x), dot(x, x)};
    return weighted_sum(parts, {0.5, -1.25, 2.0});
  });
  run("softmax", a, [&](Tape& t, Var x) { return pn(t, softmax(x)); });
  run("log_softmax_at", a, [&](Tape&, Var x) { return log_softmax_at(x, 3); });
  {
    const Array z = Array::scalar(rng.normal());
    run("bce_with_logits/1", z, [&](Tape&, Var x) { return bce_with_logits(x, 1.0); });
    run("bce_with_logits/0", z, [&](Tape&, Var x) { return bce_with_logits(x, 0.0); });
  }
  {
    const std::size_t len = 6, e = 3, m = 2, l = 3;
    const Array seq = fakegan::detail::random_array({len, e}, rng);
    const Array bank = fakegan::detail::random_array({m, l, e}, rng, 0.5);
    const Array bias = fakegan::detail::random_array({m}, rng, 0.1);
    const Array wo = fakegan::detail::random_array({m * (len - l + 1)}, rng);
    for (Nonlinearity act : {Nonlinearity::kTanh, Nonlinearity::kIdentity, Nonlinearity::kSigmoid}) {
      const std::string tag = std::string("conv1d_valid/") + to_string(act);
      run(tag + "/input", seq, [&](Tape& t, Var x) {
        return fakegan::detail::project(t, conv1d_valid(x, t.constant(bank), t.constant(bias), act), wo);
      });
      run(tag + "/kernel", bank, [&](Tape& t, Var x) {
        return fakegan::detail::project(t, conv1d_valid(t.constant(seq), x, t.constant(bias), act), wo);
      });
      run(tag + "/bias", bias, [&](Tape& t, Var x) {
        return fakegan::detail::project(t, conv1d_valid(t.constant(seq), t.constant(bank), x, act), wo);
      });
    }
  }
  {
    const Array fmap = fakegan::detail::separated_rows(3, 5, rng), w3 = fakegan::detail::random_array({3}, rng);
    run("max_over_time", fmap, [&](Tape& t, Var x) { return fakegan::detail::project(t, max_over_time(x), w3); });
  }
  {
    const std::size_t e = 3, h = 2;
    const Array x0 = fakegan::detail::random_array({e}, rng), h0 = fakegan::detail::random_array({h}, rng);
    const Array c0 = fakegan::detail::random_array({h}, rng);
    const Array wx = fakegan::detail::random_array({4 * h, e}, rng, 0.5);
    const Array wh = fakegan::detail::random_array({4 * h, h}, rng, 0.5);
    const Array bb = fakegan::detail::random_array({4 * h}, rng, 0.5);
    const Array wo = fakegan::detail::random_array({h}, rng), wc = fakegan::detail::random_array({h}, rng);
    auto cell = [&](Tape& t, Var xv, Var hv, Var cv, Var wxv, Var whv, Var bv) {
      auto [hn, cn] = lstm_cell(xv, hv, cv, LstmVars{wxv, whv, bv});
      return add(fakegan::detail::project(t, hn, wo), fakegan::detail::project(t, cn, wc));
    };
    auto k = [&](const Array& v) { return [&v](Tape& t) { return t.constant(v); }; };
    run("lstm_cell/x", x0, [&](Tape& t, Var v) { return cell(t, v, k(h0)(t), k(c0)(t), k(wx)(t), k(wh)(t), k(bb)(t)); });
    run("lstm_cell/h", h0, [&](Tape& t, Var v) { return cell(t, k(x0)(t), v, k(c0)(t), k(wx)(t), k(wh)(t), k(bb)(t)); });
    run("lstm_cell/c", c0, [&](Tape& t, Var v) { return cell(t, k(x0)(t), k(h0)(t), v, k(wx)(t), k(wh)(t), k(bb)(t)); });
    run("lstm_cell/wx", wx, [&](Tape& t, Var v) { return cell(t, k(x0)(t), k(h0)(t), k(c0)(t), v, k(wh)(t), k(bb)(t)); });
    run("lstm_cell/wh", wh, [&](Tape& t, Var v) { return cell(t, k(x0)(t), k(h0)(t), k(c0)(t), k(wx)(t), v, k(bb)(t)); });
    run("lstm_cell/b", bb, [&](Tape& t, Var v) { return cell(t, k(x0)(t), k(h0)(t), k(c0)(t), k(wx)(t), k(wh)(t), v); });
  }
  {
    // Inputs kept small so the relu pre-activations stay off the kink.
    const std::size_t m = 3;
    Array x0, wt, bt, whh, bh;
    do {
      x0 = fakegan::detail::random_array({m}, rng);
      wt = fakegan::detail::random_array({m, m}, rng, 0.5);
      bt = fakegan::detail::random_array({m}, rng, 0.5);
      whh = fakegan::detail::random_array({m, m}, rng, 0.5);
      bh = fakegan::detail::random_array({m}, rng, 0.5);
      Array pre = bh;
      kernels::matvec_add(whh.values(), m, m, x0.values(), pre.values());
      bool ok = true;
      for (double v : pre.values()) ok = ok && std::abs(v) > 0.05;
      if (ok) break;
    } while (true);
    const Array wo = fakegan::detail::random_array({m}, rng);
    auto hw = [&](Tape& t, Var xv, Var a1, Var a2, Var a3, Var a4) {
      return fakegan::detail::project(t, highway_layer(xv, HighwayVars{a1, a2, a3, a4}), wo);
    };
    auto k = [](Tape& t, const Array& v) { return t.constant(v); };
    run("highway/x", x0, [&](Tape& t, Var v) { return hw(t, v, k(t, wt), k(t, bt), k(t, whh), k(t, bh)); });
    run("highway/wt", wt, [&](Tape& t, Var v) { return hw(t, k(t, x0), v, k(t, bt), k(t, whh), k(t, bh)); });
    run("highway/bt", bt, [&](Tape& t, Var v) { return hw(t, k(t, x0), k(t, wt), v, k(t, whh), k(t, bh)); });
    run("highway/wh", whh, [&](Tape& t, Var v) { return hw(t, k(t, x0), k(t, wt), k(t, bt), v, k(t, bh)); });
    run("highway/bh", bh, [&](Tape& t, Var v) { return hw(t, k(t, x0), k(t, wt), k(t, bt), k(t, whh), v); });
  }
  return out;
}

// Generator negative log-likelihood over a small batch, all trainable
// tensors (embeddings included).
inline GradCheckCase check_generator_nll(std::uint64_t seed, double eps = 1e-5) {
  auto vocab = synthetic_vocabulary(5);
  GeneratorConfig gc;
  gc.hidden = 4;
  gc.sequence_length = 6;
  gc.init_scale = 0.5;
  gc.train_embeddings = true;
  GeneratorParams g = make_generator(random_embeddings(*vocab, 3, seed), gc, derive_seed(seed, {1}));
  // Larger embeddings than the default so every path carries real signal.
  Rng rng = Rng::stream(seed, {0x9e});
  for (double& v : g.embedding.values()) v = rng.normal() * 0.5;
  std::vector<TokenSequence> batch = sample_many(g, 3, derive_seed(seed, {2}));
  auto build = [&](ad::Tape& tape) {
    GeneratorVars v = bind(tape, g);
    std::vector<ad::Var> terms;
    for (const auto& s : batch) terms.push_back(record_nll(tape, v, g, s));
    return ad::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / 3.0));
  };
  GradCheckReport r = grad_check_params(build, trainable_arrays(g.tensors()), eps);
  return {"generator-nll", seed, r.max_relative_error, r.coordinates};
}

// Discriminator cross-entropy on a small batch with fixed dropout masks.
inline GradCheckCase check_discriminator_loss(std::uint64_t seed, double eps = 1e-5) {
  auto vocab = synthetic_vocabulary(6);
  DiscriminatorConfig dc;
  dc.kernels = {{2, 3}, {3, 2}};
  dc.sequence_length = 7;
  dc.init_scale = 0.5;
  dc.train_embeddings = true;
  DiscriminatorParams d = make_discriminator(random_embeddings(*vocab, 4, seed), dc, Role::kD,
                                             derive_seed(seed, {1}));
  Rng rng = Rng::stream(seed, {0xd1});
  for (double& v : d.embedding.values()) v = rng.normal();
  std::vector<TokenSequence> pos, neg;
  for (int i = 0; i < 4; ++i) {
    std::vector<std::size_t> sym(7);
    for (auto& s : sym) s = rng.below(6);
    (i % 2 ? neg : pos).push_back(from_symbols(sym, 7));
  }
  std::vector<Array> masks;
  for (int i = 0; i < 4; ++i) masks.push_back(dropout_mask(d.features(), dc.dropout, rng));
  auto build = [&](ad::Tape& tape) {
    DiscriminatorVars v = bind(tape, d);
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < 4; ++i) {
      const bool positive = i % 2 == 0;
      const TokenSequence& s = positive ? pos[i / 2] : neg[i / 2];
      terms.push_back(ad::bce_with_logits(record_logit(tape, v, d, s, &masks[i]), positive ? 1.0 : 0.0));
    }
    return ad::weighted_sum(terms, std::vector<double>(terms.size(), 0.25));
  };
  GradCheckReport r = grad_check_params(build, trainable_arrays(d.tensors()), eps);
  return {"discriminator-loss", seed, r.max_relative_error, r.coordinates};
}

inline std::vector<GradCheckCase> run_gradcheck_suite(const std::vector<std::uint64_t>& seeds,
                                                      double eps = 1e-5) {
  std::vector<GradCheckCase> all;
  for (std::uint64_t s : seeds) {
    auto prim = check_primitives(s, eps);
    all.insert(all.end(), prim.begin(), prim.end());
    all.push_back(check_generator_nll(s, eps));
    all.push_back(check_discriminator_loss(s, eps));
  }
  return all;
}

}  // namespace fakegan
