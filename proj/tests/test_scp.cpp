#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nnquad/errors.hpp"
#include "nnquad/harness.hpp"
#include "nnquad/scp.hpp"

using namespace nnquad;

namespace {

ReluNet RandomNet(std::mt19937& rng, FeatureKind kind, int hidden, double out_scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  ReluNet net = ReluNet::Zeros(kind, hidden);
  for (int i = 0; i < net.W.size(); ++i) net.W.data()[i] = n(rng);
  for (int i = 0; i < net.hidden_bias.size(); ++i) net.hidden_bias(i) = n(rng);
  for (int i = 0; i < net.w.size(); ++i) net.w.data()[i] = 0.1 * n(rng);
  net.out_std.setConstant(out_scale);
  if (kind == FeatureKind::kTranslational) net.out_mean = Vec3(0, 0, 9.81);
  return net;
}

std::vector<Eigen::VectorXd> Vectors(const std::vector<StateVec>& s) {
  return {s.begin(), s.end()};
}

// Min over a uniform input grid of the tracking objective of the rollout.
double GridSearch(double dt, const std::vector<Eigen::VectorXd>& desired, int levels, double amax) {
  const int h = static_cast<int>(desired.size()) - 1;
  std::vector<int> idx(static_cast<size_t>(h), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double p = desired[0](0), v = desired[0](1), f = 0.0;
    for (int k = 0; k < h; ++k) {
      const double a = -amax + 2.0 * amax * idx[static_cast<size_t>(k)] / (levels - 1);
      p += v * dt;
      v += a * dt;
      f += std::hypot(p - desired[static_cast<size_t>(k) + 1](0), v - desired[static_cast<size_t>(k) + 1](1));
    }
    best = std::min(best, f);
    int k = 0;
    while (k < h && ++idx[static_cast<size_t>(k)] == levels) idx[static_cast<size_t>(k++)] = 0;
    if (k == h) break;
  }
  return best;
}

}  // namespace

TEST(Linearize, GroundTruthHoverBlocks) {
  PhysicalParams p;
  const Linearization l = LinearizeDynamics(GroundTruthModel{p}, StateVec::Zero(), p.HoverInput().ToVector(), 0.01);
  EXPECT_LT((l.A.block<3, 3>(kPos, kVel) - 0.01 * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(l.B(kVel + 2, 0), -0.01 / p.mass, 1e-12);
  EXPECT_NEAR(l.B(kVel, 0), 0.0, 1e-15);
  EXPECT_LT(l.c.norm(), 1e-12);
}

TEST(Linearize, MatchesFiniteDifferences) {
  PhysicalParams p;
  std::mt19937 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  const LearnedModel learned{RandomNet(rng, FeatureKind::kTranslational, 30, 1.0),
                             RandomNet(rng, FeatureKind::kRotational, 30, 5.0)};
  for (const DynamicsModel& model : {DynamicsModel(GroundTruthModel{p}), DynamicsModel(learned)}) {
    for (int trial = 0; trial < 20; ++trial) {
      StateVec s;
      for (int i = 0; i < kStateDim; ++i) s(i) = 0.3 * n(rng);
      InputVec u;
      u << 0.3 + 0.05 * n(rng), 1e-3 * n(rng), 1e-3 * n(rng), 1e-3 * n(rng);
      const Linearization l = LinearizeDynamics(model, s, u, 0.01);
      EXPECT_EQ(l.c, PlanningStep(model, s, u, 0.01));
      Eigen::MatrixXd a(kStateDim, kStateDim), b(kStateDim, kInputDim);
      for (int j = 0; j < kStateDim; ++j) {
        StateVec sp = s, sm = s;
        sp(j) += 1e-7;
        sm(j) -= 1e-7;
        a.col(j) = StateDifference(PlanningStep(model, sp, u, 0.01), PlanningStep(model, sm, u, 0.01)) / 2e-7;
      }
      for (int j = 0; j < kInputDim; ++j) {
        const double h = j == 0 ? 1e-7 : 1e-10;
        InputVec up = u, um = u;
        up(j) += h;
        um(j) -= h;
        b.col(j) = StateDifference(PlanningStep(model, s, up, 0.01), PlanningStep(model, s, um, 0.01)) / (2 * h);
      }
      EXPECT_LE((a - l.A).norm() / a.norm(), 1e-4);
      EXPECT_LE((b - l.B).norm() / b.norm(), 1e-4);
    }
  }
}

TEST(Linearize, SecondOrderMismatch) {
  PhysicalParams p;
  StateVec s = StateVec::Zero();
  s.segment<3>(kAtt) = Vec3(0.2, -0.1, 0.7);
  s.segment<3>(kRate) = Vec3(0.5, -0.3, 0.2);
  const InputVec u = p.HoverInput().ToVector();
  const Linearization l = LinearizeDynamics(GroundTruthModel{p}, s, u, 0.01);
  StateVec ds;
  ds << 0.01, 0.02, -0.01, 0.1, -0.2, 0.1, 0.05, -0.04, 0.03, 0.3, 0.2, -0.1;
  InputVec du(0.02, 1e-4, -1e-4, 5e-5);
  auto mismatch = [&](double t) {
    const StateVec pred = l.c + l.A * (t * ds) + l.B * (t * du);
    return StateDifference(PlanningStep(GroundTruthModel{p}, s + t * ds, u + t * du, 0.01), pred).norm();
  };
  const double ratio = mismatch(1.0) / mismatch(0.5);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Subproblem, FeasibleIterateGivesZeroStep) {
  PhysicalParams p;
  QuadrotorPlanningModel m(GroundTruthModel{p}, p);
  const std::vector<Eigen::VectorXd> desired(11, Eigen::VectorXd::Zero(kStateDim));
  PlanTrajectory it{desired, std::vector<Eigen::VectorXd>(10, m.NominalInput())};
  const Subproblem sub = BuildSubproblem(m, desired, it);
  const Eigen::VectorXd scale = Eigen::VectorXd::Ones(kInputDim) * 1e-3;
  const SubproblemResult r = SolveSubproblem(m, sub, it, 10.0, TrustRegion{}, scale, ScpConfig{});
  for (size_t k = 0; k < it.states.size(); ++k) EXPECT_LT((r.candidate.states[k] - it.states[k]).norm(), 1e-6);
  for (size_t k = 0; k < it.inputs.size(); ++k) {
    EXPECT_LT((r.candidate.inputs[k] - it.inputs[k]).cwiseQuotient(scale).norm(), 1e-4);
  }
}

TEST(Subproblem, ZeroTrustKeepsIterate) {
  DoubleIntegratorModel m(0.1, 1.0);
  std::vector<Eigen::VectorXd> desired;
  for (int k = 0; k < 4; ++k) desired.push_back(Eigen::Vector2d(k * 0.3, 0.0));
  PlanTrajectory it{desired, std::vector<Eigen::VectorXd>(3, m.NominalInput())};
  const Subproblem sub = BuildSubproblem(m, desired, it);
  const SubproblemResult r =
      SolveSubproblem(m, sub, it, 10.0, TrustRegion{0.0, 0.0}, Eigen::VectorXd::Ones(1), ScpConfig{});
  EXPECT_EQ(r.candidate.states, it.states);
  EXPECT_EQ(r.candidate.inputs, it.inputs);
}

TEST(Subproblem, LargePenaltyReducesDefects) {
  DoubleIntegratorModel m(0.1, 1.0);
  std::vector<Eigen::VectorXd> desired;
  for (int k = 0; k < 4; ++k) desired.push_back(Eigen::Vector2d(k * 0.3, 0.0));
  PlanTrajectory it{desired, std::vector<Eigen::VectorXd>(3, m.NominalInput())};
  const Subproblem sub = BuildSubproblem(m, desired, it);
  double before = 0.0;
  for (const auto& d : sub.defects) before += d.lpNorm<1>();
  const SubproblemResult r =
      SolveSubproblem(m, sub, it, 1e4, TrustRegion{10.0, 10.0}, Eigen::VectorXd::Ones(1), ScpConfig{});
  PlanTrajectory c = r.candidate;
  double after = 0.0;
  for (size_t k = 0; k < c.inputs.size(); ++k) after += (c.states[k + 1] - m.Step(c.states[k], c.inputs[k])).lpNorm<1>();
  EXPECT_LT(after, before);
  EXPECT_LT(after, 1e-3);
}

TEST(Subproblem, LengthMismatchThrows) {
  DoubleIntegratorModel m(0.1, 1.0);
  std::vector<Eigen::VectorXd> desired(4, Eigen::Vector2d::Zero());
  PlanTrajectory it{desired, std::vector<Eigen::VectorXd>(3, m.NominalInput())};
  Subproblem sub = BuildSubproblem(m, desired, it);
  sub.defects.pop_back();
  EXPECT_THROW(SolveSubproblem(m, sub, it, 10.0, TrustRegion{}, Eigen::VectorXd::Ones(1), ScpConfig{}), Error);
}

TEST(Plan, HoverConvergesImmediately) {
  PhysicalParams p;
  DesiredTrajectory d;
  d.states.assign(51, StateVec::Zero());
  const PlanResult r = PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(r.objective, 1e-9);
  for (const auto& u : r.ref_inputs) EXPECT_LT((u - p.HoverInput().ToVector()).norm(), 1e-9);
}

TEST(Plan, StraightLineIsFeasible) {
  PhysicalParams p;
  DesiredTrajectory d;
  for (int k = 0; k <= 100; ++k) {
    StateVec s = StateVec::Zero();
    s(kPos) = 0.3 * k * d.dt;
    s(kVel) = 0.3;
    d.states.push_back(s);
  }
  const PlanResult r = PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.max_violation, 1e-4);
  EXPECT_LE(r.objective, 1e-3);
}

TEST(Plan, DoubleIntegratorMatchesGridSearch) {
  const double amax = 2.0;
  DoubleIntegratorModel m(0.2, amax);
  std::vector<Eigen::VectorXd> desired;
  for (double x : {0.0, 0.1, 0.35, 0.5, 0.55, 0.5}) desired.push_back(Eigen::Vector2d(x, 0.0));
  ScpConfig cfg;
  const PlanResult r = Plan(m, desired, cfg);
  ASSERT_TRUE(r.converged);
  const double grid = GridSearch(0.2, desired, 41, amax);
  const double plan =
      TrackingObjective(m, RolloutInputs(m, desired[0], r.ref_inputs), desired, false);
  EXPECT_LE(plan, 1.05 * grid);
  EXPECT_NEAR(plan, r.objective, 1e-3);
}

TEST(Plan, RolloutReproducesConvergedPlan) {
  PhysicalParams p;
  const DesiredTrajectory d = SinusoidYawTrajectory(0.5, 0.2, 3.0, 1.0, p.dt);
  const PlanResult r = PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{});
  ASSERT_TRUE(r.converged);
  QuadrotorPlanningModel m(GroundTruthModel{p}, p);
  const auto roll = RolloutInputs(m, r.ref_states[0], r.ref_inputs);
  double worst = 0.0;
  for (size_t k = 0; k < roll.size(); ++k) {
    worst = std::max(worst, m.Difference(roll[k], r.ref_states[k]).lpNorm<Eigen::Infinity>());
  }
  EXPECT_LE(worst, 1e-3);
  EXPECT_LT(r.objective, InfeasibilityMeasure(m, Vectors(d.states), false));
}

TEST(Plan, AcceptedMeritNonIncreasingAndPenaltyMonotone) {
  PhysicalParams p;
  const DesiredTrajectory d = SinusoidYawTrajectory(0.5, 0.2, 2.0, 1.0, p.dt);
  const PlanResult r = PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{});
  for (size_t k = 1; k < r.history.size(); ++k) {
    if (r.history[k].round == r.history[k - 1].round) {
      EXPECT_LE(r.history[k].merit, r.history[k - 1].merit + 1e-12);
    }
  }
  for (size_t k = 1; k < r.round_violation.size(); ++k) {
    EXPECT_LE(r.round_violation[k], r.round_violation[k - 1] + 1e-12);
  }
}

TEST(Plan, RejectsDtMismatchAndShortInput) {
  PhysicalParams p;
  DesiredTrajectory d;
  d.states.assign(5, StateVec::Zero());
  d.dt = 0.02;
  EXPECT_THROW(PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{}), Error);
  d.dt = p.dt;
  d.states.resize(1);
  EXPECT_THROW(PlanTrajectoryFor(GroundTruthModel{p}, p, d, ScpConfig{}), Error);
}

TEST(ScpConfig, ValidateRejectsBadTrust) {
  ScpConfig c;
  c.trust_shrink = 1.5;
  EXPECT_THROW(c.Validate(), Error);
}
