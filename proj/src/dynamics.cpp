#include "nnquad/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nnquad/errors.hpp"

namespace nnquad {

Mat3 RotationInertialToBody(const Vec3& zeta) {
  const double cp = std::cos(zeta(0)), sp = std::sin(zeta(0));
  const double ct = std::cos(zeta(1)), st = std::sin(zeta(1));
  const double cy = std::cos(zeta(2)), sy = std::sin(zeta(2));
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, cp, sp, 0, -sp, cp;
  ry << ct, 0, -st, 0, 1, 0, st, 0, ct;
  rz << cy, sy, 0, -sy, cy, 0, 0, 0, 1;
  return rx * ry * rz;
}

Mat3 EulerRateMatrix(const Vec3& zeta) {
  const double ct = std::cos(zeta(1));
  if (std::abs(ct) <= kSingularCos) {
    throw Error(ErrorCode::kSingularAttitude,
                "pitch " + std::to_string(zeta(1)) + " rad is at gimbal lock");
  }
  const double sp = std::sin(zeta(0)), cp = std::cos(zeta(0));
  const double tt = std::tan(zeta(1));
  Mat3 r;
  r << 1, sp * tt, cp * tt,
       0, cp, -sp,
       0, sp / ct, cp / ct;
  return r;
}

Accelerations GroundTruthAccel(const State& s, const RotorInput& u, const PhysicalParams& params) {
  Accelerations a;
  const Mat3 body_to_inertial = RotationInertialToBody(s.zeta).transpose();
  a.fv = body_to_inertial * Vec3(0.0, 0.0, -u.u1 / params.mass) + Vec3(0.0, 0.0, params.g);
  const Vec3& inertia = params.inertia_diag;
  const Vec3 momentum = inertia.cwiseProduct(s.omega);
  a.fw = (u.torque - s.omega.cross(momentum)).cwiseQuotient(inertia);
  return a;
}

void ValidateModel(const DynamicsModel& model) {
  if (const auto* learned = std::get_if<LearnedModel>(&model)) {
    if (learned->fv_net.kind != FeatureKind::kTranslational ||
        learned->fw_net.kind != FeatureKind::kRotational) {
      throw Error(ErrorCode::kModelContractViolation,
                  "learned model needs a translational fv net and a rotational fw net");
    }
    learned->fv_net.Validate();
    learned->fw_net.Validate();
  } else {
    std::get<GroundTruthModel>(model).params.Validate();
  }
}

Accelerations ModelAccel(const DynamicsModel& model, const State& s, const RotorInput& u) {
  if (const auto* gt = std::get_if<GroundTruthModel>(&model)) {
    return GroundTruthAccel(s, u, gt->params);
  }
  const auto& learned = std::get<LearnedModel>(model);
  if (learned.fv_net.kind != FeatureKind::kTranslational ||
      learned.fw_net.kind != FeatureKind::kRotational) {
    throw Error(ErrorCode::kModelContractViolation, "feature layout mismatch in learned model");
  }
  Accelerations a;
  a.fv = Forward(learned.fv_net, Featurize(s, u, FeatureKind::kTranslational)).physical;
  a.fw = Forward(learned.fw_net, Featurize(s, u, FeatureKind::kRotational)).physical;
  return a;
}

StateVec StateDerivative(const DynamicsModel& model, const State& s, const RotorInput& u) {
  const Accelerations a = ModelAccel(model, s, u);
  StateVec d;
  d << s.v, a.fv, EulerRateMatrix(s.zeta) * s.omega, a.fw;
  return d;
}

void CheckEnvelope(const State& s) {
  if (!s.AllFinite()) throw Error(ErrorCode::kEnvelopeViolation, "state is not finite");
  const double limit = std::numbers::pi / 2.0 - kEnvelopeMargin;
  if (std::abs(s.zeta(0)) >= limit || std::abs(s.zeta(1)) >= limit) {
    throw Error(ErrorCode::kEnvelopeViolation,
                "tilt out of envelope (roll " + std::to_string(s.zeta(0)) + ", pitch " +
                    std::to_string(s.zeta(1)) + ")");
  }
}

State Step(const DynamicsModel& model, const State& s, const RotorInput& u, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  StateVec x = s.ToVector() + StateDerivative(model, s, u) * dt;
  WrapAttitude(x);
  State next = State::FromVector(x);
  CheckEnvelope(next);
  return next;
}

namespace {

StateVec PlantDerivative(const StateVec& x, const RotorInput& u, const PhysicalParams& params) {
  const State s = State::FromVector(x);
  const Accelerations a = GroundTruthAccel(s, u, params);
  StateVec d;
  d << s.v, a.fv, EulerRateMatrix(s.zeta) * s.omega, a.fw;
  return d;
}

}  // namespace

State SimulateFine(const State& s, const RotorInput& u, const PhysicalParams& params, double dt,
                   int substeps) {
  if (substeps < 1) throw Error(ErrorCode::kInvalidArgument, "substeps must be >= 1");
  const double h = dt / substeps;
  StateVec x = s.ToVector();
  for (int i = 0; i < substeps; ++i) {
    const StateVec k1 = PlantDerivative(x, u, params);
    const StateVec k2 = PlantDerivative(x + 0.5 * h * k1, u, params);
    const StateVec k3 = PlantDerivative(x + 0.5 * h * k2, u, params);
    const StateVec k4 = PlantDerivative(x + h * k3, u, params);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  WrapAttitude(x);
  State next = State::FromVector(x);
  CheckEnvelope(next);
  return next;
}

}  // namespace nnquad
