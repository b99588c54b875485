#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nnquad/control.hpp"
#include "nnquad/errors.hpp"
#include "nnquad/harness.hpp"

using namespace nnquad;

namespace {

FlightConfig DefaultFlight() {
  FlightConfig fc;
  fc.limits = InputLimits::FromParams(fc.params);
  fc.K = DesignLqr(GroundTruthModel{fc.params}, fc.params, fc.pd, LqrWeights{}).K;
  return fc;
}

}  // namespace

TEST(Riccati, ScalarGoldenRatio) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const RiccatiSolution sol = SolveRiccati(one, one, one, one);
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  EXPECT_NEAR(sol.P(0, 0), phi, 1e-9);
  EXPECT_NEAR(sol.K(0, 0), -phi / (1.0 + phi), 1e-9);
  EXPECT_NEAR(sol.K(0, 0), -0.6180339887, 1e-9);
}

TEST(Riccati, SolutionSatisfiesEquation) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1, 0.1, 0, 1;
  B << 0.005, 0.1;
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2), R = Eigen::MatrixXd::Identity(1, 1);
  const RiccatiSolution s = SolveRiccati(A, B, Q, R, 1e-12);
  const Eigen::MatrixXd P = s.P;
  const Eigen::MatrixXd rhs =
      Q + A.transpose() * P * A -
      A.transpose() * P * B * (R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
  EXPECT_LT((rhs - P).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(SpectralRadius(A + B * s.K), 1.0);
}

TEST(Lqr, HoverDesignIsStable) {
  PhysicalParams p;
  const LqrDesign d = DesignLqr(GroundTruthModel{p}, p, PdGains{}, LqrWeights{});
  EXPECT_EQ(d.K.rows(), 7);
  EXPECT_EQ(d.K.cols(), 12);
  EXPECT_LT(d.spectral_radius, 1.0);
  EXPECT_GT(d.iterations, 0);
}

TEST(Lqr, HoverLinearizationHasGravityCoupling) {
  PhysicalParams p;
  Eigen::MatrixXd A, B;
  NearHoverLinearization(GroundTruthModel{p}, p, PdGains{}, A, B);
  // Thrust pushes along -z.
  EXPECT_LT(B(kVel + 2, 0), 0.0);
  EXPECT_NEAR(B(kVel + 2, 0), -kOuterDt / p.mass, 0.05 * kOuterDt / p.mass);
  // Position integrates velocity.
  EXPECT_NEAR(A(kPos, kVel), kOuterDt, 1e-6);
}

TEST(InnerPd, SignAndClamp) {
  PhysicalParams p;
  const InputLimits lim = InputLimits::FromParams(p);
  AugmentedInput des;
  des.u1 = p.HoverThrust();
  State s;
  s.zeta(0) = 0.1;
  const RotorInput u = InnerPd(des, s, PdGains{}, lim);
  EXPECT_LT(u.torque(0), 0.0);
  des.u1 = 10.0;
  s.zeta(0) = 1.2;
  s.omega(0) = 50.0;
  const RotorInput big = InnerPd(des, s, PdGains{}, lim);
  EXPECT_EQ(big.u1, lim.u1_max);
  EXPECT_EQ(big.torque(0), -lim.torque_max);
}

TEST(InnerPd, StabilizesRollOffset) {
  PhysicalParams p;
  const InputLimits lim = InputLimits::FromParams(p);
  AugmentedInput des;
  des.u1 = p.HoverThrust();
  State s;
  s.zeta(0) = 0.2;
  for (int k = 0; k < 250; ++k) {
    s = SimulateFine(s, InnerPd(des, s, PdGains{}, lim), p, kInnerDt, 4);
  }
  EXPECT_LT(std::abs(s.zeta(0)), 0.02);
}

TEST(AugmentInput, ReproducesInputOnReference) {
  std::mt19937 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  const PdGains g;
  for (int k = 0; k < 50; ++k) {
    State ref;
    ref.zeta = Vec3(0.3 * n(rng), 0.3 * n(rng), n(rng));
    ref.omega = Vec3(n(rng), n(rng), n(rng));
    const RotorInput u{0.3 + 0.01 * n(rng), 1e-3 * Vec3(n(rng), n(rng), n(rng))};
    const AugmentedInput aug = AugmentInput(u, ref, g);
    EXPECT_EQ(aug.u1, u.u1);
    EXPECT_LT((PdMoments(aug, ref, g) - u.torque).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RotateError, IsometryAndInverse) {
  std::mt19937 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    StateVec e;
    for (int i = 0; i < kStateDim; ++i) e(i) = n(rng);
    const double psi = n(rng);
    const StateVec r = RotateError(e, psi);
    EXPECT_NEAR(r.norm(), e.norm(), 1e-12);
    EXPECT_LT((RotateError(r, -psi) - e).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(r.tail<6>(), e.tail<6>());
    EXPECT_EQ(r(kPos + 2), e(kPos + 2));
  }
}

TEST(Fly, RejectsHoverOffset) {
  const FlightConfig fc = DefaultFlight();
  std::vector<StateVec> states(301, StateVec::Zero());
  states[0](kPos) = 0.1;
  const Reference ref = ModelFreeReference(states, kOuterDt, fc.params, fc.pd);
  const FlightLog log = Fly(ref, fc, FlightMode::kModelFree);
  ASSERT_FALSE(log.crashed);
  ASSERT_EQ(log.rows.size(), 300u);
  EXPECT_NEAR(log.rows.front().state(kPos), 0.1, 1e-15);
  EXPECT_LT(log.rows.back().state.head<3>().norm(), 0.01);
}

TEST(Fly, HoverStaysPut) {
  const FlightConfig fc = DefaultFlight();
  const std::vector<StateVec> states(101, StateVec::Zero());
  const FlightLog log = Fly(ModelFreeReference(states, kOuterDt, fc.params, fc.pd), fc, FlightMode::kModelFree);
  EXPECT_LT(log.rows.back().state.norm(), 1e-9);
}

TEST(Fly, YawEquivariantTracking) {
  const FlightConfig fc = DefaultFlight();
  const DesiredTrajectory base = SinusoidYawTrajectory(0.5, 0.2, 5.0, 0.0, kOuterDt);
  const double psi0 = 1.0;
  const double c = std::cos(psi0), s = std::sin(psi0);
  std::vector<StateVec> turned = base.states;
  for (auto& x : turned) {
    const double px = x(kPos), py = x(kPos + 1), vx = x(kVel), vy = x(kVel + 1);
    x(kPos) = c * px - s * py;
    x(kPos + 1) = s * px + c * py;
    x(kVel) = c * vx - s * vy;
    x(kVel + 1) = s * vx + c * vy;
    x(kAtt + 2) = WrapAngle(x(kAtt + 2) + psi0);
  }
  auto rms = [&](const std::vector<StateVec>& desired) {
    const FlightLog log = Fly(ModelFreeReference(desired, kOuterDt, fc.params, fc.pd), fc, FlightMode::kModelFree);
    std::vector<StateVec> st;
    for (const auto& r : log.rows) st.push_back(r.state);
    return TrackingError(st, kOuterDt, desired, kOuterDt).rms_position;
  };
  const double a = rms(base.states), b = rms(turned);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b, a, 0.05 * a);
}

TEST(Fly, LoggedInputMatchesApplied) {
  const FlightConfig fc = DefaultFlight();
  const DesiredTrajectory t = SinusoidYawTrajectory(0.5, 0.2, 2.0, 1.0, kOuterDt);
  const FlightLog log = Fly(ModelFreeReference(t.states, kOuterDt, fc.params, fc.pd), fc, FlightMode::kModelFree);
  for (const auto& r : log.rows) {
    if (r.clamped_inner) continue;
    const Vec3 m = PdMoments(r.aug, State::FromVector(r.state), fc.pd);
    ASSERT_LT((m - r.applied.torque).cwiseAbs().maxCoeff(), 1e-15);
    ASSERT_EQ(r.applied.u1, r.aug.u1);
  }
}

TEST(Fly, CrashIsLoggedNotThrown) {
  FlightConfig fc = DefaultFlight();
  std::vector<StateVec> states(200, StateVec::Zero());
  Reference ref = ModelFreeReference(states, kOuterDt, fc.params, fc.pd);
  fc.K.setZero();
  fc.limits.rate_cmd_max = 1e3;
  for (auto& u : ref.inputs) u.omega_des = Vec3(200, 0, 0);
  const FlightLog log = Fly(ref, fc, FlightMode::kModelFree);
  EXPECT_TRUE(log.crashed);
  EXPECT_LT(log.rows.size(), 199u);
  EXPECT_FALSE(log.crash_reason.empty());
}

TEST(Fly, RejectsWrongDt) {
  const FlightConfig fc = DefaultFlight();
  std::vector<StateVec> states(10, StateVec::Zero());
  Reference ref = ModelFreeReference(states, kOuterDt, fc.params, fc.pd);
  ref.dt = 0.02;
  EXPECT_THROW(Fly(ref, fc, FlightMode::kModelFree), Error);
}

TEST(TrackingError, ShorterLogAndZeroError) {
  const DesiredTrajectory t = SinusoidYawTrajectory(0.5, 0.2, 1.0, 0.0, kOuterDt);
  const ErrorReport same = TrackingError(t.states, kOuterDt, t.states, kOuterDt);
  EXPECT_EQ(same.rms_position, 0.0);
  std::vector<StateVec> shifted(t.states.begin(), t.states.begin() + 10);
  for (auto& x : shifted) x(kPos + 2) += 0.3;
  const ErrorReport r = TrackingError(shifted, kOuterDt, t.states, kOuterDt);
  EXPECT_EQ(r.samples, 10);
  EXPECT_NEAR(r.rms_position, 0.3, 1e-12);
  std::vector<StateVec> longer = t.states;
  longer.push_back(longer.back());
  EXPECT_THROW(TrackingError(longer, kOuterDt, t.states, kOuterDt), Error);
}
