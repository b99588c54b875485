#include "nnquad/types.hpp"

#include <cmath>
#include <numbers>

#include "nnquad/errors.hpp"

namespace nnquad {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularAttitude: return "SingularAttitude";
    case ErrorCode::kEnvelopeViolation: return "EnvelopeViolation";
    case ErrorCode::kModelContractViolation: return "ModelContractViolation";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kMalformedModelFile: return "MalformedModelFile";
    case ErrorCode::kQpNumericalFailure: return "QpNumericalFailure";
    case ErrorCode::kRiccatiDiverged: return "RiccatiDiverged";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

double WrapAngle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

StateVec State::ToVector() const {
  StateVec x;
  x << p, v, zeta, omega;
  return x;
}

State State::FromVector(const StateVec& x) {
  State s;
  s.p = x.segment<3>(kPos);
  s.v = x.segment<3>(kVel);
  s.zeta = x.segment<3>(kAtt);
  s.omega = x.segment<3>(kRate);
  return s;
}

bool State::AllFinite() const {
  return p.allFinite() && v.allFinite() && zeta.allFinite() && omega.allFinite();
}

InputVec RotorInput::ToVector() const {
  InputVec u;
  u << u1, torque;
  return u;
}

RotorInput RotorInput::FromVector(const InputVec& u) {
  return RotorInput{u(0), u.tail<3>()};
}

AugVec AugmentedInput::ToVector() const {
  AugVec u;
  u << u1, zeta_des, omega_des;
  return u;
}

AugmentedInput AugmentedInput::FromVector(const AugVec& u) {
  return AugmentedInput{u(0), u.segment<3>(1), u.segment<3>(4)};
}

void PhysicalParams::Validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::kConfigError, what); };
  if (!(mass > 0.0)) fail("mass must be positive");
  if (!(inertia_diag.minCoeff() > 0.0)) fail("inertia components must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!(g >= 0.0)) fail("g must be non-negative");
  if (!(u1_max > 0.0)) fail("u1_max must be positive");
  if (!(torque_max > 0.0)) fail("torque_max must be positive");
  if (substeps < 1) fail("substeps must be at least 1");
}

StateVec StateDifference(const StateVec& a, const StateVec& b) {
  StateVec d = a - b;
  for (int i = 0; i < 3; ++i) d(kAtt + i) = WrapAngle(d(kAtt + i));
  return d;
}

void WrapAttitude(StateVec& x) {
  for (int i = 0; i < 3; ++i) x(kAtt + i) = WrapAngle(x(kAtt + i));
}

}  // namespace nnquad
