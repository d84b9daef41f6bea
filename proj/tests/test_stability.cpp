#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "bftl/stability.hpp"

namespace {

using bftl::ModelParams;

ModelParams calibration_params() { return ModelParams::with_tanh(0.5, 18.1, 4.5, 10.0, 3.0, 2.0, 2.5); }

// Reference shape rescaled to v_max = 10.
ModelParams window_params(double alpha = 6.9) { return ModelParams::with_tanh(alpha, 35.1, 4.5, 10.0, 3.0, 1.0, 2.5); }

TEST(Equilibrium, ReferenceValueAndZeroAcceleration) {
  const auto p = ModelParams::reference();
  const auto eq = bftl::equilibrium(p, 15.0);
  EXPECT_NEAR(eq.h_star, 2.50000083152802766, 1e-12);
  EXPECT_NEAR(bftl::acc(p, eq.h_star, 15.0, 15.0), 0.0, 1e-12);
  EXPECT_THROW(bftl::equilibrium(p, 30.0), bftl::DomainError);
  EXPECT_THROW(bftl::equilibrium(p, 0.1), bftl::DomainError);
}

// V is strictly increasing, so a bisection on V(h) = v* brackets the only root.
TEST(Equilibrium, UniqueRootAgreesWithBisection) {
  const auto p = ModelParams::reference();
  for (double vs : {1.0, 3.0, 10.0, 20.0, 29.0}) {
    double a = 0.0, b = 50.0;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      (p.V(m) < vs ? a : b) = m;
    }
    EXPECT_NEAR(bftl::equilibrium(p, vs).h_star, 0.5 * (a + b), 1e-10) << vs;
  }
}

TEST(Linearization, ReferenceEigenvalues) {
  const auto lin = bftl::linearize(ModelParams::reference(), 15.0);
  EXPECT_NEAR(lin.eigenvalues[0].real(), -1.84999893564465561, 1e-12);
  EXPECT_NEAR(std::abs(lin.eigenvalues[0].imag()), 2.01928456998359913, 1e-12);
  EXPECT_EQ(lin.eigenvalues[0], std::conj(lin.eigenvalues[1]));
  EXPECT_TRUE(lin.locally_stable);
  EXPECT_NEAR(lin.jacobian[1][1], -3.69999787, 1e-7);
  EXPECT_NEAR(lin.jacobian[1][0], -7.50000624, 1e-7);
}

TEST(Linearization, DoubleRootAndMarginalCase) {
  const auto dbl = bftl::linearize_at(1.0, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(dbl.eigenvalues[0].real(), -1.0);
  EXPECT_DOUBLE_EQ(dbl.eigenvalues[1].real(), -1.0);
  EXPECT_EQ(dbl.eigenvalues[0].imag(), 0.0);
  EXPECT_TRUE(dbl.locally_stable);

  const auto flat = bftl::linearize_at(1.0, 1.0, 1.0, 0.0);
  EXPECT_FALSE(flat.locally_stable);
  EXPECT_DOUBLE_EQ(flat.eigenvalues[0].real(), -2.0);
  EXPECT_DOUBLE_EQ(flat.eigenvalues[1].real(), 0.0);
}

TEST(Linearization, EigenpairResidualOnRandomGrid) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> A(0.01, 50.0), B(0.0, 100.0), H(0.1, 20.0), Vp(0.0, 40.0);
  for (int k = 0; k < 2000; ++k) {
    const auto lin = bftl::linearize_at(A(rng), B(rng), H(rng), Vp(rng));
    const auto& J = lin.jacobian;
    for (const auto& l : lin.eigenvalues) {
      // (J - l I) [1, l]^T = 0 for the companion matrix.
      const std::complex<double> r0 = J[0][0] - l + J[0][1] * l;
      const std::complex<double> r1 = J[1][0] + (J[1][1] - l) * l;
      const double scale = std::max({1.0, std::abs(l) * std::abs(l), std::abs(J[1][0]), std::abs(J[1][1] * l)});
      EXPECT_LT(std::abs(r0), 1e-9 * scale);
      EXPECT_LT(std::abs(r1), 1e-9 * scale);
    }
  }
}

TEST(BetaAssumption, CalibrationShape) {
  const auto p = calibration_params();
  const auto v = bftl::check_assumption_beta(p, 0.5, 10.0);
  EXPECT_NEAR(v.argmax, 1.43221474039363081, 1e-10);
  EXPECT_NEAR(v.max_F, 18.0124056038280581, 1e-10);
  EXPECT_TRUE(v.satisfied);
  auto q = p;
  q.beta = 18.0;
  EXPECT_FALSE(bftl::check_assumption_beta(q, 0.5, 10.0).satisfied);
}

TEST(BetaAssumption, AgreesWithDenseGridScan) {
  for (const auto& p : {calibration_params(), ModelParams::reference(), window_params()}) {
    const double lo = 0.3, hi = 12.0;
    const auto v = bftl::check_assumption_beta(p, lo, hi);
    double best = 0.0;
    const int n = 1000000;
    for (int k = 0; k <= n; ++k) best = std::max(best, bftl::headway_gain(p, lo + (hi - lo) * k / n));
    EXPECT_NEAR(v.max_F, best, 1e-6 * best);
    EXPECT_GE(v.max_F, best * (1 - 1e-15));
  }
}

TEST(BetaAssumption, GenericShapeUsesGridSearch) {
  const auto ref = ModelParams::reference();
  std::vector<double> h, vv;
  for (double x = 0.0; x <= 20.0; x += 0.25) {
    h.push_back(x);
    vv.push_back(ref.V(x));
  }
  auto p = ref;
  p.ov = bftl::OptimalVelocity::tabulated(h, vv);
  p.v_max = p.ov.supremum();
  const auto v = bftl::check_assumption_beta(p, 0.5, 10.0);
  double best = 0.0;
  for (int k = 0; k <= 1000000; ++k) best = std::max(best, bftl::headway_gain(p, 0.5 + 9.5 * k / 1e6));
  EXPECT_NEAR(v.max_F, best, 1e-6 * best);
  // The interpolant only approximates the tanh shape it was sampled from.
  EXPECT_NEAR(v.argmax, 2.86442948078726161, 0.05);
  EXPECT_NEAR(v.max_F, 108.074433622968349, 0.02 * 108.07);
}

TEST(BetaAssumption, ViolatedOnReferenceParams) {
  const auto p = ModelParams::reference();
  const auto v = bftl::check_assumption_beta(p, 0.730849247724095, 42.3446298189643336);
  EXPECT_FALSE(v.satisfied);
  EXPECT_NEAR(v.argmax, 2.86442948078726161, 1e-10);
  EXPECT_NEAR(v.max_F, 108.074433622968349, 1e-9);
}

TEST(BetaAssumption, ClampsToIntervalAndAcceptsSinglePoint) {
  const auto p = ModelParams::reference();
  const auto left = bftl::check_assumption_beta(p, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(left.argmax, 1.0);
  const auto point = bftl::check_assumption_beta(p, 2.5, 2.5);
  EXPECT_DOUBLE_EQ(point.argmax, 2.5);
  EXPECT_DOUBLE_EQ(point.max_F, bftl::headway_gain(p, 2.5));
  EXPECT_THROW(bftl::check_assumption_beta(p, 0.0, 1.0), bftl::DomainError);
  EXPECT_THROW(bftl::check_assumption_beta(p, 2.0, 1.0), bftl::DomainError);
}

TEST(AlphaAssumption, WindowOnDecayInterval) {
  const auto w = bftl::check_assumption_alpha(window_params(), 2.3, 2.7);
  EXPECT_NEAR(w.lower, 6.63516068052930057, 1e-9);
  EXPECT_NEAR(w.upper, 7.21742427006720789, 1e-9);
  EXPECT_TRUE(w.nonempty);
  EXPECT_TRUE(w.satisfied);
  EXPECT_FALSE(bftl::check_assumption_alpha(window_params(6.0), 2.3, 2.7).satisfied);
  EXPECT_FALSE(bftl::check_assumption_alpha(window_params(7.3), 2.3, 2.7).satisfied);
}

TEST(AlphaAssumption, EmptyWindowForReferenceRange) {
  const auto w = bftl::check_assumption_alpha(ModelParams::reference(), 0.73, 10.0);
  EXPECT_FALSE(w.nonempty);
  EXPECT_FALSE(w.satisfied);
}

TEST(AlphaAssumption, SinglePointWindow) {
  const auto p = window_params();
  const double h = 2.5;
  const auto w = bftl::check_assumption_alpha(p, h, h);
  EXPECT_DOUBLE_EQ(w.lower, std::max(p.V_prime(h), p.beta / (h * h)));
  EXPECT_DOUBLE_EQ(w.upper, 0.5 * p.V_prime(h) + p.beta / (h * h));
}

TEST(DecayRates, ReferenceValues) {
  EXPECT_NEAR(bftl::decay_rate_BE(ModelParams::reference(), 10.0, 15.0), 0.7, 1e-12);
  const auto r = bftl::decay_rate_F(window_params(), 2.3);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, 0.264839319470699433, 1e-12);
  EXPECT_FALSE(bftl::decay_rate_F(window_params(6.0), 2.3).has_value());
}

// Inside the window alpha > beta / h_lo^2, so the F-rate must exist.
TEST(DecayRates, AlphaWindowImpliesPositiveRate) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int inside = 0;
  for (int k = 0; k < 400; ++k) {
    const double lo = 1.5 + 2.0 * U(rng);
    const double hi = lo + 0.8 * U(rng);
    const auto p = window_params(4.0 + 6.0 * U(rng));
    if (!bftl::check_assumption_alpha(p, lo, hi).satisfied) continue;
    ++inside;
    const auto r = bftl::decay_rate_F(p, lo);
    ASSERT_TRUE(r.has_value());
    EXPECT_GT(*r, 0.0);
  }
  EXPECT_GT(inside, 10);
}

// Scaling velocities, alpha and beta by k scales every rate by k and keeps
// both verdicts.
TEST(StabilityReport, VelocityScalingInvariance) {
  const auto p = window_params();
  const double k = 2.5;
  auto q = ModelParams::with_tanh(p.alpha * k, p.beta * k, 4.5, 10.0 * k, 3.0 * k, 1.0, 2.5);
  const auto a = bftl::analyze_stability(p, 8.0, 2.3, 2.7, 5.0);
  const auto b = bftl::analyze_stability(q, 8.0 * k, 2.3, 2.7, 5.0);
  EXPECT_NEAR(a.h_star, b.h_star, 1e-12);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(std::abs(b.linearization.eigenvalues[i] - k * a.linearization.eigenvalues[i]), 0.0, 1e-9);
  }
  EXPECT_EQ(a.beta.satisfied, b.beta.satisfied);
  EXPECT_EQ(a.alpha.satisfied, b.alpha.satisfied);
  EXPECT_NEAR(b.alpha.lower, k * a.alpha.lower, 1e-9);
  EXPECT_NEAR(b.alpha.upper, k * a.alpha.upper, 1e-9);
  EXPECT_NEAR(b.decay_rate_BE, k * a.decay_rate_BE, 1e-12);
  EXPECT_NEAR(*b.decay_rate_F, k * *a.decay_rate_F, 1e-12);
}

TEST(StabilityReport, JsonSchema) {
  const auto r = bftl::analyze_stability(ModelParams::reference(), 15.0, 0.73, 10.0, 10.0);
  const auto j = bftl::to_json(r);
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  const std::vector<std::string> expect{"v_star",        "h_star",         "jacobian",      "eigenvalues",
                                        "locally_stable", "beta_verdict",  "alpha_interval", "alpha_verdict",
                                        "decay_rate_BE", "decay_rate_F"};
  EXPECT_EQ(keys, expect);
  EXPECT_EQ(j["eigenvalues"].size(), 2u);
  EXPECT_TRUE(j["eigenvalues"][0].contains("re"));
  EXPECT_EQ(j["beta_verdict"]["verdict"], "Violated");
  EXPECT_TRUE(j["alpha_interval"].is_null());
  EXPECT_EQ(j["alpha_verdict"], "Violated");
  EXPECT_TRUE(j["decay_rate_F"].is_null());
  EXPECT_NEAR(j["decay_rate_BE"].get<double>(), 0.7, 1e-12);
}

}  // namespace
