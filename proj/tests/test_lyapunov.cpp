#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bftl/lyapunov.hpp"

namespace {

using bftl::ConstantVelocity;
using bftl::LeaderProfile;
using bftl::ModelParams;
using bftl::Region;
using bftl::Verdict;

// Beta dominates V'(h) h^2 on the whole half-line for this shape.
ModelParams global_beta_params() { return ModelParams::with_tanh(0.5, 18.1, 4.5, 10.0, 3.0, 2.0, 2.5); }

ModelParams window_params(double alpha = 6.9) { return ModelParams::with_tanh(alpha, 35.1, 4.5, 10.0, 3.0, 1.0, 2.5); }

bftl::Trajectory constant_run(const ModelParams& p, double v_star, std::vector<double> h, std::vector<double> v,
                              double dt, double t_end) {
  return bftl::simulate(bftl::make_state(h, v, v_star, p.length), LeaderProfile(ConstantVelocity{v_star}), p, dt,
                        t_end);
}

TEST(Regions, ClassifyExamples) {
  const double vs = 15.0;
  EXPECT_EQ(bftl::classify(12.0, 10.0, vs).region, Region::A);
  EXPECT_EQ(bftl::classify(10.0, 12.0, vs).region, Region::B);
  EXPECT_EQ(bftl::classify(10.0, 20.0, vs).region, Region::C);
  EXPECT_EQ(bftl::classify(18.0, 20.0, vs).region, Region::D);
  EXPECT_EQ(bftl::classify(20.0, 18.0, vs).region, Region::E);
  EXPECT_EQ(bftl::classify(20.0, 10.0, vs).region, Region::F);
  EXPECT_EQ(bftl::classify(15.0, 15.0, vs).region, Region::Equilibrium);
  const auto b1 = bftl::classify(15.0, 20.0, vs);
  EXPECT_EQ(b1.region, Region::Boundary);
  EXPECT_EQ(b1.boundary, bftl::BoundaryKind::VelocityAtTarget);
  EXPECT_EQ(bftl::to_string(b1), "Boundary(v=v*)");
  EXPECT_EQ(bftl::classify(10.0, 15.0, vs).boundary, bftl::BoundaryKind::OptimalAtTarget);
  EXPECT_EQ(bftl::classify(12.0, 12.0, vs).boundary, bftl::BoundaryKind::VelocityAtOptimal);
  EXPECT_EQ(bftl::classify(15.0 + 5e-10, 15.0, vs).region, Region::Equilibrium);
}

TEST(Regions, ShiftInvariance) {
  const std::vector<std::pair<double, double>> points{{12, 10}, {10, 12}, {10, 20}, {18, 20}, {20, 18}, {20, 10}};
  for (double s : {-7.0, 0.5, 3.25, 11.0}) {
    for (const auto& [v, V] : points) {
      EXPECT_EQ(bftl::classify(v + s, V + s, 15.0 + s).region, bftl::classify(v, V, 15.0).region);
    }
  }
}

TEST(Regions, AllowedTransitionGraph) {
  EXPECT_TRUE(bftl::transition_allowed(Region::B, Region::A));
  EXPECT_TRUE(bftl::transition_allowed(Region::B, Region::C));
  EXPECT_TRUE(bftl::transition_allowed(Region::C, Region::D));
  EXPECT_TRUE(bftl::transition_allowed(Region::E, Region::D));
  EXPECT_TRUE(bftl::transition_allowed(Region::E, Region::F));
  EXPECT_TRUE(bftl::transition_allowed(Region::F, Region::A));
  EXPECT_TRUE(bftl::transition_allowed(Region::A, Region::Equilibrium));
  EXPECT_FALSE(bftl::transition_allowed(Region::A, Region::B));
  EXPECT_FALSE(bftl::transition_allowed(Region::D, Region::C));
  EXPECT_FALSE(bftl::transition_allowed(Region::C, Region::B));
  EXPECT_FALSE(bftl::transition_allowed(Region::A, Region::D));
}

TEST(Energies, InitialValuesAndOrdering) {
  const auto p = ModelParams::reference();
  const auto traj = constant_run(p, 15.0, {6.0}, {10.0}, 1e-3, 25.0);
  const auto E = bftl::energy_E(traj, 15.0);
  const auto F = bftl::energy_F(traj, 15.0);
  const double V0 = p.V(6.0);
  EXPECT_DOUBLE_EQ(E[0], 0.5 * (V0 - 15.0) * (V0 - 15.0));
  EXPECT_DOUBLE_EQ(F[0], 0.5 * ((V0 - 15.0) * (V0 - 15.0) + 25.0 + (V0 - 10.0) * (V0 - 10.0)));
  for (std::size_t k = 0; k < E.size(); ++k) EXPECT_GE(F[k], E[k]);
  EXPECT_LT(E.back(), 1e-4 * E.front());
  const auto tail = bftl::energy_tail_check(traj, 15.0);
  EXPECT_TRUE(tail.entry_time.has_value());
  EXPECT_TRUE(tail.monotone);
}

TEST(Energies, VanishAtEquilibrium) {
  const auto p = ModelParams::reference();
  const double hs = p.V_inverse(15.0);
  const auto traj = constant_run(p, 15.0, {hs, hs}, {15.0, 15.0}, 1e-2, 10.0);
  for (const auto& Fi : bftl::energy_F_chain(traj, 15.0)) {
    for (double f : Fi) EXPECT_LT(f, 1e-20);
  }
  EXPECT_THROW(bftl::energy_E(traj, 15.0), bftl::DomainError);
}

TEST(Energies, ChainConverges) {
  const auto p = ModelParams::reference();
  const auto traj = constant_run(p, 15.0, {10.0, 8.0, 6.0, 5.0}, {16.0, 22.0, 26.0, 30.0}, 1e-3, 50.0);
  for (const auto& Fi : bftl::energy_F_chain(traj, 15.0)) EXPECT_LT(Fi.back(), 1e-3);
}

TEST(Energies, LeadingFollowerMatchesTruncatedPlatoon) {
  const auto p = ModelParams::reference();
  const auto full = constant_run(p, 15.0, {10.0, 8.0}, {16.0, 22.0}, 1e-3, 10.0);
  const auto part = constant_run(p, 15.0, {10.0}, {16.0}, 1e-3, 10.0);
  EXPECT_EQ(bftl::energy_F_chain(full, 15.0)[0], bftl::energy_F(part, 15.0));
}

TEST(Gronwall, ResidualVanishesAsGridRefines) {
  const auto p = window_params();
  const double vs = 5.0;
  const std::vector<double> h{2.52, 2.47}, v{4.9, 5.15};
  const auto fine = bftl::gronwall_residual(constant_run(p, vs, h, v, 1e-4, 2.0), 3, vs);
  const auto coarse = bftl::gronwall_residual(constant_run(p, vs, h, v, 1e-3, 2.0), 3, vs);
  EXPECT_LE(fine.max_residual, 1e-3);
  EXPECT_GE(coarse.max_residual, 5.0 * fine.max_residual);
}

TEST(Gronwall, ZeroAtEquilibriumAndNeedsAPredecessorFollower) {
  const auto p = window_params();
  const double hs = p.V_inverse(5.0);
  const auto traj = constant_run(p, 5.0, {hs, hs}, {5.0, 5.0}, 1e-3, 2.0);
  EXPECT_LT(bftl::gronwall_residual(traj, 3, 5.0).max_residual, 1e-12);
  EXPECT_THROW(bftl::gronwall_residual(traj, 2, 5.0), bftl::DomainError);
}

TEST(Audit, StartInAStaysInA) {
  const auto p = global_beta_params();
  const double vs = 5.0;
  const auto traj = constant_run(p, vs, {p.V_inverse(4.0)}, {4.5}, 1e-3, 20.0);
  const auto a = bftl::region_transition_audit(traj, vs);
  EXPECT_EQ(a.initial.region, Region::A);
  EXPECT_TRUE(a.beta.satisfied);
  EXPECT_EQ(a.verdict, Verdict::Pass);
  for (const auto& t : a.transitions) EXPECT_EQ(t.from, Region::A);
}

TEST(Audit, StartInCLeavesWithinBound) {
  const auto p = global_beta_params();
  const double vs = 5.0;
  const auto traj = constant_run(p, vs, {p.V_inverse(7.0)}, {3.0}, 1e-3, 20.0);
  const auto a = bftl::region_transition_audit(traj, vs);
  EXPECT_EQ(a.initial.region, Region::C);
  EXPECT_EQ(a.verdict, Verdict::Pass);
  ASSERT_TRUE(a.escape.has_value());
  EXPECT_NEAR(a.escape->bound, 2.0, 1e-12);
  ASSERT_TRUE(a.escape->exit_time.has_value());
  EXPECT_LE(*a.escape->exit_time, a.escape->bound);
  ASSERT_FALSE(a.transitions.empty());
  EXPECT_EQ(a.transitions.front().from, Region::C);
  EXPECT_EQ(a.transitions.front().to, Region::D);
}

TEST(Audit, EquilibriumHasNoTransitions) {
  const auto p = global_beta_params();
  const double hs = p.V_inverse(5.0);
  const auto a = bftl::region_transition_audit(constant_run(p, 5.0, {hs}, {5.0}, 1e-3, 5.0), 5.0);
  EXPECT_EQ(a.initial.region, Region::Equilibrium);
  EXPECT_TRUE(a.transitions.empty());
  EXPECT_EQ(a.verdict, Verdict::Pass);
}

TEST(Audit, InconclusiveWhenBetaFails) {
  const auto p = ModelParams::reference();
  const auto a = bftl::region_transition_audit(constant_run(p, 15.0, {4.0}, {20.0}, 1e-3, 7.0), 15.0);
  EXPECT_FALSE(a.beta.satisfied);
  EXPECT_EQ(a.verdict, Verdict::Inconclusive);
  EXPECT_THROW(bftl::region_transition_audit(constant_run(p, 15.0, {4.0}, {20.0}, 1e-3, 1.0), 14.0),
               bftl::DomainError);
}

TEST(Audit, EscapeBoundFormula) {
  auto p = ModelParams::reference();
  const double h0 = p.V_inverse(20.0);
  EXPECT_NEAR(bftl::escape_time_bound(p, h0, 10.0, 15.0, Region::C), 2.0, 1e-12);
  EXPECT_THROW(bftl::escape_time_bound(p, h0, 10.0, 15.0, Region::F), bftl::DomainError);
  EXPECT_THROW(bftl::escape_time_bound(p, h0, 10.0, 15.0, Region::A), bftl::DomainError);
}

TEST(Audit, TransitionsJson) {
  const std::vector<bftl::Transition> log{{1.5, Region::C, Region::D}};
  const auto j = bftl::to_json(log);
  EXPECT_EQ(j.dump(), R"([{"t":1.5,"from":"C","to":"D"}])");
}

// Slow-manifold start: with real eigenvalues the state approaches h* along
// the slow eigenvector and never leaves B (x0 < 0) or E (x0 > 0).
struct ConfinedScenario {
  ModelParams p = ModelParams::reference();
  double vs = 25.0;
  double hs = 0.0;
  double slow = 0.0;

  ConfinedScenario() {
    p.alpha = 40.0;
    hs = p.V_inverse(vs);
    const auto lin = bftl::linearize(p, vs);
    slow = std::min(std::abs(lin.eigenvalues[0].real()), std::abs(lin.eigenvalues[1].real()));
  }

  bftl::Trajectory run(double x0) const { return constant_run(p, vs, {hs + x0}, {vs + slow * x0}, 1e-3, 2.0); }
};

TEST(Envelope, ConfinedScenarioHasRealEigenvalues) {
  const ConfinedScenario s;
  const auto lin = bftl::linearize(s.p, s.vs);
  EXPECT_EQ(lin.eigenvalues[0].imag(), 0.0);
  EXPECT_NEAR(s.hs, 3.304719, 1e-6);
  EXPECT_NEAR(s.slow, 10.7112, 1e-4);
}

TEST(Envelope, RegionBPasses) {
  const ConfinedScenario s;
  for (double x0 : {-0.05, -0.1, -0.2}) {
    const auto rep = bftl::envelope_check_BE(s.run(x0), s.vs);
    EXPECT_EQ(rep.verdict, Verdict::Pass) << x0 << ": " << rep.reason;
    EXPECT_EQ(rep.region, Region::B);
  }
}

TEST(Envelope, RegionEPasses) {
  const ConfinedScenario s;
  for (double x0 : {0.05, 0.1, 0.2}) {
    const auto rep = bftl::envelope_check_BE(s.run(x0), s.vs);
    EXPECT_EQ(rep.verdict, Verdict::Pass) << x0 << ": " << rep.reason;
    EXPECT_EQ(rep.region, Region::E);
  }
}

TEST(Envelope, CorruptedSampleFails) {
  const ConfinedScenario s;
  const auto good = s.run(-0.1);
  std::vector<bftl::PlatoonState> samples(good.samples().begin(), good.samples().end());
  const std::size_t k = samples.size() / 2;
  // Still in B, but much farther from v* than the upper envelope allows.
  const double V = s.p.V(good.headway(k, 2));
  samples[k].v[1] = V - 0.5;
  const bftl::Trajectory bad(good.params(), good.leader(), good.dt(), good.stride(), std::move(samples));
  ASSERT_EQ(bftl::label_at(bad, k, s.vs).region, Region::B);
  const auto rep = bftl::envelope_check_BE(bad, s.vs);
  EXPECT_EQ(rep.verdict, Verdict::Fail);
  ASSERT_TRUE(rep.t_fail.has_value());
  EXPECT_EQ(*rep.t_fail, bad.time(k));
}

TEST(Envelope, EquilibriumPassesAndSpiralIsInconclusive) {
  const auto p = ModelParams::reference();
  const double hs = p.V_inverse(15.0);
  EXPECT_EQ(bftl::envelope_check_BE(constant_run(p, 15.0, {hs}, {15.0}, 1e-2, 5.0), 15.0).verdict, Verdict::Pass);
  const auto spiral = bftl::envelope_check_BE(constant_run(p, 15.0, {hs - 0.3}, {13.0}, 1e-3, 10.0), 15.0);
  EXPECT_EQ(spiral.verdict, Verdict::Inconclusive);
}

TEST(DecayEnvelope, PassesInsideWindow) {
  const auto p = window_params();
  const auto traj = constant_run(p, 5.0, {2.5}, {4.8}, 1e-3, 20.0);
  const auto [lo, hi] = traj.headway_range(2);
  ASSERT_GE(lo, 2.3);
  ASSERT_LE(hi, 2.7);
  const auto rep = bftl::decay_envelope_check(traj, 5.0, 2.3);
  EXPECT_EQ(rep.verdict, Verdict::Pass) << rep.reason;
  EXPECT_NEAR(rep.rate, 0.264839319470699433, 1e-12);
}

TEST(DecayEnvelope, InconclusiveOutsideWindow) {
  const auto p = window_params(6.0);
  const auto traj = constant_run(p, 5.0, {2.5}, {4.8}, 1e-3, 20.0);
  const auto rep = bftl::decay_envelope_check(traj, 5.0, 2.3);
  EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
  EXPECT_FALSE(rep.reason.empty());
}

TEST(Csv, EnergyAndPhaseHeaders) {
  const auto p = ModelParams::reference();
  const auto two = constant_run(p, 15.0, {6.0}, {10.0}, 0.5, 1.0);
  const auto three = constant_run(p, 15.0, {6.0, 5.0}, {10.0, 12.0}, 0.5, 1.0);
  const auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
  std::ostringstream a, b, c;
  bftl::write_energy_csv(a, two, 15.0);
  bftl::write_energy_csv(b, three, 15.0);
  bftl::write_phase_csv(c, two);
  EXPECT_EQ(first_line(a.str()), "t,E,F");
  EXPECT_EQ(first_line(b.str()), "t,E,F,F2,F3");
  EXPECT_EQ(first_line(c.str()), "V,v");
  const std::string rows = a.str();
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 4);
}

}  // namespace
