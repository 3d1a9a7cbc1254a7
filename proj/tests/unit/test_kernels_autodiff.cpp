#include <gtest/gtest.h>

#include <cmath>

#include "fakegan/autodiff.hpp"
#include "fakegan/kernels.hpp"
#include "oracles.hpp"

using namespace fakegan;

namespace {

Array random_array(Shape s, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Array a(std::move(s));
  for (double& v : a.values()) v = scale * rng.normal();
  return a;
}

}  // namespace

TEST(Kernels, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(kernels::sigmoid(0.0), 0.5);
  EXPECT_GT(kernels::sigmoid(-800.0), -1.0);
  EXPECT_TRUE(std::isfinite(kernels::sigmoid(-800.0)));
  EXPECT_EQ(kernels::sigmoid(800.0), 1.0);
  EXPECT_NEAR(kernels::sigmoid(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-16);
}

TEST(Kernels, SoftmaxMatchesOracleAndSumsToOne) {
  const std::vector<double> z{1.0, -2.0, 0.5, 3.0};
  auto p = kernels::softmax(z);
  auto q = oracle::softmax({1.0L, -2.0L, 0.5L, 3.0L});
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(p[i], static_cast<double>(q[i]), 1e-15);
    s += p[i];
  }
  EXPECT_NEAR(s, 1.0, 1e-15);
  // Shift invariance and large logits.
  auto big = kernels::softmax(std::vector<double>{1001.0, 998.0, 1000.5, 1003.0});
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(big[i], p[i], 1e-12);
}

TEST(Kernels, SoftmaxRejectsNonFinite) {
  EXPECT_THROW(kernels::softmax(std::vector<double>{1.0, NAN}), NumericDomainError);
  EXPECT_THROW(kernels::softmax(std::vector<double>{INFINITY, 0.0}), NumericDomainError);
}

TEST(Kernels, LstmStepMatchesOracle) {
  const std::size_t h = 3, e = 2;
  Array wx = random_array({4 * h, e}, 1), wh = random_array({4 * h, h}, 2), b = random_array({4 * h}, 3);
  Array x = random_array({e}, 4), hp = random_array({h}, 5), cp = random_array({h}, 6);
  std::vector<double> ho(h), co(h), scratch;
  kernels::lstm_step(wx.values(), wh.values(), b.values(), h, x.values(), hp.values(), cp.values(),
                     ho, co, scratch);
  oracle::LstmState prev{{hp[0], hp[1], hp[2]}, {cp[0], cp[1], cp[2]}};
  auto ref = oracle::lstm(wx, wh, b, x, prev);
  for (std::size_t k = 0; k < h; ++k) {
    EXPECT_NEAR(ho[k], static_cast<double>(ref.h[k]), 1e-14);
    EXPECT_NEAR(co[k], static_cast<double>(ref.c[k]), 1e-14);
  }
}

TEST(Kernels, ConvolutionWindowsAreContiguousRows) {
  // L=3, E=2, l=2: windows are rows {0,1} and {1,2}.
  Array seq({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Array k({2, 2}, std::vector<double>{1, 0, 0, 1});
  auto out = kernels::conv1d_valid(seq, k, 0.5, Nonlinearity::kIdentity);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], 1 + 4 + 0.5);
  EXPECT_EQ(out[1], 3 + 6 + 0.5);
}

TEST(Kernels, ConvolutionWindowLongerThanSequenceFails) {
  EXPECT_THROW(kernels::conv1d_valid(Array({2, 3}), Array({3, 3}), 0.0, Nonlinearity::kTanh),
               DimensionError);
  EXPECT_THROW(kernels::conv1d_valid(Array({4, 3}), Array({2, 2}), 0.0, Nonlinearity::kTanh),
               DimensionError);
}

TEST(Kernels, MaxOverTimePicksFirstMaximum) {
  const std::vector<double> xs{0.1, 0.7, -1.0, 0.7};
  EXPECT_EQ(kernels::argmax_first(xs), 1u);
  EXPECT_EQ(kernels::max_over_time(xs), 0.7);
  EXPECT_THROW(kernels::argmax_first(std::vector<double>{}), DimensionError);
}

TEST(Kernels, HighwayWithClosedGateIsIdentity) {
  // Gate bias -inf-ish: T ~ 0, so y ~ x.
  const std::size_t n = 3;
  Array wt({n, n}, 0.0), bt({n}, -60.0), wh = random_array({n, n}, 7), bh({n}, 0.0);
  std::vector<double> x{0.3, -0.2, 1.5}, y(n);
  kernels::highway(wt.values(), bt.values(), wh.values(), bh.values(), Nonlinearity::kRelu, x, y);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y[i], x[i], 1e-20);
}

TEST(Kernels, ParseNonlinearity) {
  EXPECT_EQ(parse_nonlinearity("relu"), Nonlinearity::kRelu);
  EXPECT_EQ(parse_nonlinearity(to_string(Nonlinearity::kTanh)), Nonlinearity::kTanh);
  EXPECT_THROW(parse_nonlinearity("gelu"), ContractError);
}

// ---------------------------------------------------------------------------

TEST(Tape, ForwardValuesOfComposedGraph) {
  ad::Tape t;
  Array a = Array::vector({1.0, 2.0}), b = Array::vector({3.0, -1.0});
  ad::Var x = t.param(a), y = t.param(b);
  ad::Var z = ad::sum(ad::mul(ad::add(x, y), ad::sub(x, y)));  // sum(x^2 - y^2)
  EXPECT_DOUBLE_EQ(z.value()[0], (1 - 9) + (4 - 1));
  t.backward(z);
  EXPECT_EQ(t.grad_of(a), Array::vector({2.0, 4.0}));
  EXPECT_EQ(t.grad_of(b), Array::vector({-6.0, 2.0}));
}

TEST(Tape, SharedParameterAccumulatesAcrossUses) {
  ad::Tape t;
  Array w = Array::vector({2.0});
  ad::Var x1 = t.param(w), x2 = t.param(w);
  EXPECT_EQ(x1.id(), x2.id());
  ad::Var z = ad::sum(ad::mul(x1, ad::mul(x2, x1)));  // w^3
  t.backward(z);
  EXPECT_DOUBLE_EQ(t.grad_of(w)[0], 12.0);
}

TEST(Tape, RepeatedBackwardIsIdempotent) {
  ad::Tape t;
  Array w = Array::vector({0.5, -0.25});
  ad::Var z = ad::dot(t.param(w), t.param(w));
  t.backward(z);
  Array g1 = t.grad_of(w);
  t.backward(z);
  EXPECT_EQ(t.grad_of(w), g1);
}

TEST(Tape, FrozenParameterGetsNoGradient) {
  ad::Tape t;
  Array w = Array::vector({1.0, 2.0}), e = Array::vector({3.0, 4.0});
  ad::Var z = ad::dot(t.param(w), t.param(e, false));
  t.backward(z);
  EXPECT_EQ(t.grad_of(w), e);
  EXPECT_EQ(t.grad_of(e), Array({2}, 0.0));
}

TEST(Tape, LookupErrors) {
  ad::Tape t;
  Array w = Array::vector({1.0}), other = Array::vector({1.0});
  ad::Var z = ad::sum(t.param(w));
  EXPECT_THROW(t.grad_of(w), LookupError);  // before backward
  t.backward(z);
  EXPECT_THROW(t.grad_of(other), LookupError);
}

TEST(Tape, NonScalarBackwardNeedsSeed) {
  ad::Tape t;
  Array w = Array::vector({1.0, 2.0});
  ad::Var v = ad::tanh(t.param(w));
  EXPECT_THROW(t.backward(v), ContractError);
  EXPECT_THROW(t.backward(v, Array({3}, 1.0)), DimensionError);
  t.backward(v, Array::vector({1.0, 0.0}));
  const double th = std::tanh(1.0);
  EXPECT_NEAR(t.grad_of(w)[0], 1 - th * th, 1e-15);
  EXPECT_EQ(t.grad_of(w)[1], 0.0);
}

TEST(Tape, ShapeErrors) {
  ad::Tape t;
  Array a({2}), b({3}), m({2, 3});
  EXPECT_THROW(ad::add(t.param(a), t.param(b)), DimensionError);
  EXPECT_THROW(ad::matvec(t.param(m), t.param(a)), DimensionError);
  EXPECT_THROW(ad::slice(t.param(a), 1, 2), DimensionError);
  EXPECT_THROW(ad::reshape(t.param(m), {4}), DimensionError);
  EXPECT_THROW(ad::gather_rows(t.param(m), {2}), LookupError);
  EXPECT_THROW(ad::log_softmax_at(t.param(a), 5), LookupError);
}

TEST(Tape, CrossTapeUseIsRejected) {
  ad::Tape t1, t2;
  Array a({2}, 1.0), b({2}, 1.0);
  ad::Var x = t1.param(a), y = t2.param(b);
  EXPECT_THROW(ad::add(x, y), ContractError);
}

TEST(Tape, BceWithLogitsClosedForm) {
  ad::Tape t;
  Array z = Array::scalar(0.3);
  ad::Var l = ad::bce_with_logits(t.param(z), 1.0);
  EXPECT_NEAR(l.value()[0], std::log1p(std::exp(-0.3)), 1e-15);
  t.backward(l);
  EXPECT_NEAR(t.grad_of(z)[0], kernels::sigmoid(0.3) - 1.0, 1e-15);
  // Extreme logits stay finite.
  ad::Tape t2;
  Array big = Array::scalar(-500.0);
  ad::Var l2 = ad::bce_with_logits(t2.param(big), 1.0);
  EXPECT_NEAR(l2.value()[0], 500.0, 1e-9);
}

TEST(Tape, LogSoftmaxAtMatchesOracle) {
  ad::Tape t;
  Array z = Array::vector({0.2, -1.0, 2.5});
  ad::Var l = ad::log_softmax_at(t.param(z), 2);
  auto p = oracle::softmax({0.2L, -1.0L, 2.5L});
  EXPECT_NEAR(l.value()[0], static_cast<double>(std::log(p[2])), 1e-15);
  t.backward(l);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(t.grad_of(z)[i], (i == 2 ? 1.0 : 0.0) - static_cast<double>(p[i]), 1e-15);
  }
}

TEST(Tape, MaxOverTimeRoutesGradientToFirstArgmax) {
  ad::Tape t;
  Array fmap({2, 3}, std::vector<double>{0.5, 0.9, 0.9, -1.0, -2.0, -0.5});
  ad::Var m = ad::max_over_time(t.param(fmap));
  EXPECT_EQ(m.value(), Array::vector({0.9, -0.5}));
  t.backward(ad::sum(m));
  EXPECT_EQ(t.grad_of(fmap), Array({2, 3}, std::vector<double>{0, 1, 0, 0, 0, 1}));
}

TEST(Tape, ConvolutionForwardMatchesKernel) {
  Array seq = random_array({5, 3}, 11), bank = random_array({2, 2, 3}, 12), bias = random_array({2}, 13);
  ad::Tape t;
  ad::Var out = ad::conv1d_valid(t.param(seq), t.param(bank), t.param(bias), Nonlinearity::kTanh);
  ASSERT_EQ(out.shape(), (Shape{2, 4}));
  for (std::size_t f = 0; f < 2; ++f) {
    Array k({2, 3}, std::vector<double>(bank.storage().begin() + f * 6, bank.storage().begin() + (f + 1) * 6));
    auto ref = kernels::conv1d_valid(seq, k, bias[f], Nonlinearity::kTanh);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.value().at(f, i), ref[i], 1e-15);
  }
}

TEST(Tape, LstmCellMatchesOracle) {
  const std::size_t h = 2, e = 3;
  Array wx = random_array({4 * h, e}, 21), wh = random_array({4 * h, h}, 22), b = random_array({4 * h}, 23);
  Array x = random_array({e}, 24), hp = random_array({h}, 25), cp = random_array({h}, 26);
  ad::Tape t;
  auto [hn, cn] = ad::lstm_cell(t.param(x), t.param(hp), t.param(cp),
                                ad::LstmVars{t.param(wx), t.param(wh), t.param(b)});
  auto ref = oracle::lstm(wx, wh, b, x, {{hp[0], hp[1]}, {cp[0], cp[1]}});
  for (std::size_t k = 0; k < h; ++k) {
    EXPECT_NEAR(hn.value()[k], static_cast<double>(ref.h[k]), 1e-14);
    EXPECT_NEAR(cn.value()[k], static_cast<double>(ref.c[k]), 1e-14);
  }
}

TEST(Tape, NonFiniteForwardIsReported) {
  ad::Tape t;
  Array a = Array::vector({NAN, 0.0});
  EXPECT_THROW(ad::softmax(t.param(a)), NumericDomainError);
}
