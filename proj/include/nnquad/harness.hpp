#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nnquad/control.hpp"
#include "nnquad/sysid.hpp"
#include "nnquad/trajectory.hpp"

namespace nnquad {

enum class ManeuverKind { kSinusoidXY, kSinusoidXZ, kSinusoidYZ, kYawSpin, kRandomExcitation };

const char* ManeuverKindName(ManeuverKind kind);
ManeuverKind ParseManeuverKind(const std::string& name);

struct ManeuverSpec {
  ManeuverKind kind = ManeuverKind::kSinusoidXY;
  double amplitude = 0.5;  // [m]
  double frequency = 0.2;  // [Hz]
  double duration = 30.0;  // [s]
  double yaw_rate = 0.5;   // [rad/s], YawSpin only
  std::uint64_t seed = 0;  // RandomExcitation only
};

struct ManeuverEnvelope {
  double max_frequency = 0.5;  // [Hz]
  double max_accel = 3.0;      // [m/s^2]
  double max_yaw_rate = 3.0;   // [rad/s]
};

/// Analytic desired trajectory with velocities equal to the position
/// derivatives. Sinusoids hold yaw at zero, YawSpin holds position, and
/// RandomExcitation is a hover at a seeded heading (its motion comes from
/// the input excitation). Throws kEnvelopeViolation when amplitude*(2 pi f)^2
/// exceeds the acceleration envelope, kInvalidArgument on other bad specs.
DesiredTrajectory GenerateManeuver(const ManeuverSpec& spec, double dt,
                                   const ManeuverEnvelope& envelope = {});

/// Sinusoid in the XY plane with a simultaneous yaw ramp:
///   x = A sin(2 pi f t), y = A (1 - cos(2 pi f t)), psi = yaw_total * t / T.
DesiredTrajectory SinusoidYawTrajectory(double amplitude, double frequency, double duration,
                                        double yaw_total, double dt);

struct ExcitationConfig {
  double thrust_std = 0.03;  // fraction of hover thrust
  double tilt_std = 0.12;    // [rad] on roll/pitch commands
  double time_constant = 0.5;  // [s] first-order smoothing
};

/// Band-limited random walk added to the augmented feedforward (thrust and
/// roll/pitch commands only; the yaw command is untouched).
std::vector<AugVec> ExcitationSequence(std::uint64_t seed, int steps, double dt,
                                       const PhysicalParams& params, const ExcitationConfig& cfg);

/// Default training suite: planar sinusoids, fixed-position yaw spins and
/// random excitation, scaled so the durations sum to `total_seconds`.
std::vector<ManeuverSpec> DefaultSuite(double total_seconds);

struct CollectConfig {
  FlightConfig flight;
  ExcitationConfig excitation;
  ManeuverEnvelope envelope;
  std::uint64_t seed = 1;
};

struct CollectResult {
  std::vector<FlightLog> logs;
  int crashed = 0;
};

/// Flies every maneuver in model-free mode and returns the logs in spec order.
CollectResult Collect(const std::vector<ManeuverSpec>& specs, const CollectConfig& cfg);

enum class TargetMode { kTrueAccel, kFiniteDifference };

struct DatasetOptions {
  double train_frac = 0.6;
  double val_frac = 0.25;
  std::uint64_t seed = 1;
  TargetMode targets = TargetMode::kTrueAccel;
};

struct DatasetPair {
  Dataset translational;
  Dataset rotational;
};

/// De-augments every logged input through the PD map, featurizes it for both
/// nets, shuffles, splits and fits the output scalers on the training split.
DatasetPair BuildDatasets(const std::vector<FlightLog>& logs, const PdGains& pd,
                          const InputLimits& limits, const DatasetOptions& opts);

struct CoverageAudit {
  long rows = 0;
  long violations = 0;  // rows with |v| >= v_thresh and |wz| >= wz_thresh
};

CoverageAudit AuditCoverage(const std::vector<FlightLog>& logs, double v_thresh = 0.05,
                            double wz_thresh = 0.05);

/// FlightLog CSV: t, 12 state columns, 7 augmented-input columns, 4 applied
/// input columns, 6 true accelerations, two clamp flags.
void WriteFlightLogCsv(const std::filesystem::path& path, const FlightLog& log);
FlightLog ReadFlightLogCsv(const std::filesystem::path& path);

}  // namespace nnquad
