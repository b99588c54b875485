#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnquad/dynamics.hpp"
#include "nnquad/types.hpp"

namespace nnquad {

constexpr double kOuterDt = 0.01;   // LQR, 100 Hz
constexpr double kInnerDt = 0.004;  // PD, 250 Hz
constexpr double kBaseDt = 0.002;   // common divisor of both periods

/// Attitude PD gains. With u_{2:4} = Kp (zeta - zeta_des) + Kd (omega - omega_des)
/// the stabilizing gains are negative definite.
struct PdGains {
  Mat3 kp = Vec3(-6.4e-3, -6.4e-3, -2.9e-3).asDiagonal();
  Mat3 kd = Vec3(-5.1e-4, -5.1e-4, -5.2e-4).asDiagonal();
};

/// Input limits shared by the PD loop and the outer feedback.
struct InputLimits {
  double u1_max = 0.6;
  double torque_max = 1e-2;
  double tilt_cmd_max = 0.6;  // |phi_des|, |theta_des| [rad]
  double rate_cmd_max = 10.0;  // |omega_des| [rad/s]

  static InputLimits FromParams(const PhysicalParams& params);
};

struct LqrWeights {
  // State: position, velocity, roll/pitch, yaw, body rates.
  double q_pos = 100.0;
  double q_vel = 10.0;
  double q_att = 10.0;
  double q_yaw = 50.0;
  double q_rate = 1.0;
  // Augmented input: thrust, attitude commands, rate commands.
  double r_thrust = 100.0;
  double r_att = 10.0;
  double r_rate = 1.0;

  Eigen::MatrixXd Q() const;
  Eigen::MatrixXd R() const;
};

struct LqrDesign {
  Eigen::MatrixXd A;  // 12 x 12
  Eigen::MatrixXd B;  // 12 x 7
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd K;  // 7 x 12, applied as u = u_ref + K * rotated error
  Eigen::MatrixXd P;
  int iterations = 0;
  double spectral_radius = 0.0;
};

struct RiccatiSolution {
  Eigen::MatrixXd K;
  Eigen::MatrixXd P;
  int iterations = 0;
};

/// Iterates P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA to a fixed point and
/// returns K = -(R + B'PB)^-1 B'PA. Convergence means the largest entry of
/// |P_k - P_{k-1}| is below tol * max(1, |P|_max). Throws kRiccatiDiverged.
RiccatiSolution SolveRiccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                             double tol = 1e-9, int max_iterations = 100000);

Eigen::MatrixXd LqrGain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

double SpectralRadius(const Eigen::MatrixXd& m);

/// Physical input from an augmented input and the measured state, clamped
/// to the actuator limits.
RotorInput InnerPd(const AugmentedInput& desired, const State& measured, const PdGains& gains,
                   const InputLimits& limits);

/// Unclamped PD map (used by the dataset round trip).
Vec3 PdMoments(const AugmentedInput& desired, const State& measured, const PdGains& gains);

/// Augmented input that makes the PD loop reproduce `u` when the vehicle is
/// exactly on `ref`: zeta_des = ref attitude, omega_des = ref rates - Kd^-1 u_{2:4}.
AugmentedInput AugmentInput(const RotorInput& u, const State& ref, const PdGains& gains);

/// Central-difference linearization of one 10 ms outer step (PD at 250 Hz
/// plus plant) about hover, in augmented-input coordinates. The two inner
/// tick phases of the 3/2 schedule are averaged.
void NearHoverLinearization(const DynamicsModel& plant, const PhysicalParams& params,
                            const PdGains& pd, Eigen::MatrixXd& A, Eigen::MatrixXd& B,
                            double h = 1e-6);

LqrDesign DesignLqr(const DynamicsModel& plant, const PhysicalParams& params, const PdGains& pd,
                    const LqrWeights& weights);

/// Rotates the (x, y) position and velocity errors into the yaw-aligned frame.
StateVec RotateError(const StateVec& err, double psi);

struct FeedbackResult {
  AugmentedInput input;
  bool clamped = false;
};

FeedbackResult OuterFeedback(const StateVec& ref_state, const AugmentedInput& ref_input,
                             const State& measured, const Eigen::MatrixXd& K,
                             const InputLimits& limits);

/// Time-indexed reference at the outer rate: states[n], inputs[n].
struct Reference {
  std::vector<StateVec> states;       // N + 1
  std::vector<AugmentedInput> inputs;  // N
  double dt = kOuterDt;

  int steps() const { return static_cast<int>(inputs.size()); }
};

enum class FlightMode { kNnModel, kModelFree };
const char* FlightModeName(FlightMode mode);
FlightMode ParseFlightMode(const std::string& name);

/// Reference with zero feedforward: hover thrust and the reference attitude
/// and rates as the PD set point.
Reference ModelFreeReference(const std::vector<StateVec>& desired, double dt, const PhysicalParams& params,
                             const PdGains& gains);

/// Reference built from planned states and physical inputs.
Reference PlannedReference(const std::vector<StateVec>& states, const std::vector<InputVec>& inputs,
                           double dt, const PdGains& gains);

struct NoiseConfig {
  double sensor_pos_std = 0.0;   // [m]
  double sensor_vel_std = 0.0;   // [m/s]
  double sensor_att_std = 0.0;   // [rad]
  double sensor_rate_std = 0.0;  // [rad/s]
  double thrust_std = 0.0;       // [N], resampled every PD tick
  double torque_std = 0.0;       // [N m], resampled every PD tick
};

struct FlightRow {
  double t = 0.0;
  StateVec state;
  AugmentedInput aug;
  RotorInput applied;  // input acting on the plant at t (after noise)
  Accelerations accel;  // true plant accelerations at t
  bool clamped_outer = false;
  bool clamped_inner = false;
};

struct FlightLog {
  std::vector<FlightRow> rows;
  double dt = kOuterDt;
  bool crashed = false;
  double crash_time = 0.0;
  std::string crash_reason;
  std::string provenance;
};

struct FlightConfig {
  PhysicalParams params;
  PdGains pd;
  InputLimits limits;
  Eigen::MatrixXd K;
  NoiseConfig noise;
  std::uint64_t seed = 0;
};

/// Multi-rate closed-loop simulation: feedback every 10 ms, PD at 0, 4, 8 ms
/// of even periods and 0, 4 ms of odd periods (250 Hz on average), RK4 plant
/// in between. Logs one row per outer tick. An envelope violation ends the
/// flight and marks the log as crashed.
FlightLog Fly(const Reference& ref, const FlightConfig& cfg, FlightMode mode,
              const std::vector<AugVec>* excitation = nullptr);

struct ErrorReport {
  // Absolute error series per channel: x, y, z, phi, theta, psi.
  std::vector<std::array<double, 6>> abs_error;
  std::array<double, 6> rms{};
  std::array<double, 6> max{};
  double rms_position = 0.0;  // sqrt(mean |p - p_d|^2)
  double max_position = 0.0;
  int samples = 0;
};

/// Compares log states with desired states tick by tick. The log may be
/// shorter than the desired trajectory (a crash), never longer.
ErrorReport TrackingError(const std::vector<StateVec>& log_states, double log_dt,
                          const std::vector<StateVec>& desired, double desired_dt);

}  // namespace nnquad
