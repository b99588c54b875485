#pragma once

#include <variant>

#include "nnquad/relu_net.hpp"
#include "nnquad/types.hpp"

namespace nnquad {

/// Gimbal-lock guard used by EulerRateMatrix.
constexpr double kSingularCos = 1e-3;
/// Roll/pitch must stay strictly inside +-(pi/2 - kEnvelopeMargin).
constexpr double kEnvelopeMargin = 0.1;

/// R_x(phi) R_y(theta) R_z(psi): maps inertial-frame vectors into the body frame.
Mat3 RotationInertialToBody(const Vec3& zeta);

/// Maps body rates to Euler-angle rates. Throws kSingularAttitude when
/// |cos(theta)| <= kSingularCos.
Mat3 EulerRateMatrix(const Vec3& zeta);

struct Accelerations {
  Vec3 fv = Vec3::Zero();  // linear acceleration in the inertial frame
  Vec3 fw = Vec3::Zero();  // angular acceleration in the body frame
};

/// Newton-Euler rigid body with diagonal inertia, thrust along -z_B, NED gravity.
Accelerations GroundTruthAccel(const State& s, const RotorInput& u, const PhysicalParams& params);

struct GroundTruthModel {
  PhysicalParams params;
};

struct LearnedModel {
  ReluNet fv_net;
  ReluNet fw_net;
};

using DynamicsModel = std::variant<GroundTruthModel, LearnedModel>;

/// Checks that the learned nets have the translational/rotational layouts.
void ValidateModel(const DynamicsModel& model);

Accelerations ModelAccel(const DynamicsModel& model, const State& s, const RotorInput& u);

StateVec StateDerivative(const DynamicsModel& model, const State& s, const RotorInput& u);

/// Throws kEnvelopeViolation if the state is non-finite or tilted past the
/// flight envelope.
void CheckEnvelope(const State& s);

/// Forward-Euler discrete map s + f(s, u) dt with angle wrapping; this is the
/// map the planner constrains.
State Step(const DynamicsModel& model, const State& s, const RotorInput& u, double dt);

/// RK4 integration of the ground-truth plant over dt using `substeps`
/// sub-intervals, input held constant.
State SimulateFine(const State& s, const RotorInput& u, const PhysicalParams& params, double dt,
                   int substeps);

}  // namespace nnquad
