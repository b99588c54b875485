#pragma once

#include <Eigen/Dense>

namespace nnquad {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using StateVec = Eigen::Matrix<double, 12, 1>;
using InputVec = Eigen::Matrix<double, 4, 1>;
using AugVec = Eigen::Matrix<double, 7, 1>;

constexpr int kStateDim = 12;
constexpr int kInputDim = 4;
constexpr int kAugDim = 7;

// Offsets of the blocks inside a 12-vector state.
constexpr int kPos = 0;
constexpr int kVel = 3;
constexpr int kAtt = 6;
constexpr int kRate = 9;

/// Wraps an angle to (-pi, pi].
double WrapAngle(double a);

/// Rigid-body state. Position and velocity live in the NED inertial frame,
/// zeta holds (roll, pitch, yaw) and omega the body-frame angular velocity.
struct State {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 zeta = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  StateVec ToVector() const;
  static State FromVector(const StateVec& x);
  bool AllFinite() const;
};

/// Physical input: thrust along -z_B [N] and body moments [N m].
struct RotorInput {
  double u1 = 0.0;
  Vec3 torque = Vec3::Zero();

  InputVec ToVector() const;
  static RotorInput FromVector(const InputVec& u);
};

/// Input of the PD-augmented system: thrust, desired attitude, desired rates.
struct AugmentedInput {
  double u1 = 0.0;
  Vec3 zeta_des = Vec3::Zero();
  Vec3 omega_des = Vec3::Zero();

  AugVec ToVector() const;
  static AugmentedInput FromVector(const AugVec& u);
};

struct PhysicalParams {
  double mass = 0.032;
  Vec3 inertia_diag{1.6e-5, 1.6e-5, 2.9e-5};
  double g = 9.81;
  double u1_max = 0.6;
  double torque_max = 1e-2;
  double dt = 0.01;
  int substeps = 4;

  double HoverThrust() const { return mass * g; }
  RotorInput HoverInput() const { return RotorInput{HoverThrust(), Vec3::Zero()}; }
  // Throws kConfigError when an invariant is broken.
  void Validate() const;
};

/// Wrapped difference a - b for the attitude block, plain difference elsewhere.
StateVec StateDifference(const StateVec& a, const StateVec& b);

/// Wraps the attitude block of a 12-vector in place.
void WrapAttitude(StateVec& x);

}  // namespace nnquad
