#include "nnquad/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nnquad/errors.hpp"

namespace nnquad {

InputLimits InputLimits::FromParams(const PhysicalParams& params) {
  InputLimits limits;
  limits.u1_max = params.u1_max;
  limits.torque_max = params.torque_max;
  return limits;
}

Eigen::MatrixXd LqrWeights::Q() const {
  Eigen::VectorXd d(kStateDim);
  d << q_pos, q_pos, q_pos, q_vel, q_vel, q_vel, q_att, q_att, q_yaw, q_rate, q_rate, q_rate;
  return d.asDiagonal();
}

Eigen::MatrixXd LqrWeights::R() const {
  Eigen::VectorXd d(kAugDim);
  d << r_thrust, r_att, r_att, r_att, r_rate, r_rate, r_rate;
  return d.asDiagonal();
}

RiccatiSolution SolveRiccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double tol,
                             int max_iterations) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "Riccati operands have inconsistent shapes");
  }
  Eigen::MatrixXd P = Q;
  for (int k = 1; k <= max_iterations; ++k) {
    const Eigen::MatrixXd BtP = B.transpose() * P;
    const Eigen::MatrixXd gain = (R + BtP * B).ldlt().solve(BtP * A);
    Eigen::MatrixXd next = Q + A.transpose() * P * A - A.transpose() * BtP.transpose() * gain;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double change = (next - P).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    P = std::move(next);
    if (change <= tol * scale) {
      const Eigen::MatrixXd BtPn = B.transpose() * P;
      RiccatiSolution sol;
      sol.K = -(R + BtPn * B).ldlt().solve(BtPn * A);
      sol.P = P;
      sol.iterations = k;
      return sol;
    }
  }
  throw Error(ErrorCode::kRiccatiDiverged,
              "no fixed point after " + std::to_string(max_iterations) + " iterations");
}

Eigen::MatrixXd LqrGain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  return SolveRiccati(A, B, Q, R).K;
}

double SpectralRadius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

Vec3 WrappedDiff(const Vec3& a, const Vec3& b) {
  return Vec3(WrapAngle(a(0) - b(0)), WrapAngle(a(1) - b(1)), WrapAngle(a(2) - b(2)));
}

double Clamp(double x, double lo, double hi, bool& clamped) {
  if (x < lo) {
    clamped = true;
    return lo;
  }
  if (x > hi) {
    clamped = true;
    return hi;
  }
  return x;
}

}  // namespace

Vec3 PdMoments(const AugmentedInput& desired, const State& measured, const PdGains& gains) {
  return gains.kp * WrappedDiff(measured.zeta, desired.zeta_des) +
         gains.kd * (measured.omega - desired.omega_des);
}

RotorInput InnerPd(const AugmentedInput& desired, const State& measured, const PdGains& gains,
                   const InputLimits& limits) {
  bool clamped = false;
  RotorInput u;
  u.u1 = Clamp(desired.u1, 0.0, limits.u1_max, clamped);
  const Vec3 m = PdMoments(desired, measured, gains);
  for (int i = 0; i < 3; ++i) u.torque(i) = Clamp(m(i), -limits.torque_max, limits.torque_max, clamped);
  return u;
}

AugmentedInput AugmentInput(const RotorInput& u, const State& ref, const PdGains& gains) {
  AugmentedInput a;
  a.u1 = u.u1;
  a.zeta_des = ref.zeta;
  a.omega_des = ref.omega - gains.kd.partialPivLu().solve(u.torque);
  return a;
}

namespace {

StateVec Rk4(const DynamicsModel& plant, const StateVec& x, const RotorInput& u, double dt) {
  auto f = [&](const StateVec& y) { return StateDerivative(plant, State::FromVector(y), u); };
  const StateVec k1 = f(x);
  const StateVec k2 = f(x + 0.5 * dt * k1);
  const StateVec k3 = f(x + 0.5 * dt * k2);
  const StateVec k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One outer period with PD updates at the given offsets [ms]; the segment
// before the first offset uses a PD output evaluated at the window start.
StateVec OuterMap(const DynamicsModel& plant, const PdGains& pd, const StateVec& x0,
                  const AugVec& uhat, const std::vector<double>& boundaries) {
  const AugmentedInput a = AugmentedInput::FromVector(uhat);
  StateVec x = x0;
  for (size_t k = 0; k + 1 < boundaries.size(); ++k) {
    const State s = State::FromVector(x);
    const RotorInput u{a.u1, PdMoments(a, s, pd)};
    const double span = boundaries[k + 1] - boundaries[k];
    const int pieces = std::max(1, static_cast<int>(std::lround(span / kBaseDt)));
    for (int i = 0; i < pieces; ++i) x = Rk4(plant, x, u, span / pieces);
  }
  return x;
}

}  // namespace

void NearHoverLinearization(const DynamicsModel& plant, const PhysicalParams& params,
                            const PdGains& pd, Eigen::MatrixXd& A, Eigen::MatrixXd& B, double h) {
  const StateVec x0 = StateVec::Zero();
  AugVec u0 = AugVec::Zero();
  u0(0) = params.HoverThrust();
  // Even periods: PD ticks at 0, 4, 8 ms. Odd periods: 0, 4 ms.
  const std::vector<std::vector<double>> phases = {{0.0, 0.004, 0.008, 0.010},
                                                   {0.0, 0.004, 0.010}};
  A = Eigen::MatrixXd::Zero(kStateDim, kStateDim);
  B = Eigen::MatrixXd::Zero(kStateDim, kAugDim);
  for (const auto& phase : phases) {
    for (int j = 0; j < kStateDim; ++j) {
      StateVec xp = x0, xm = x0;
      xp(j) += h;
      xm(j) -= h;
      A.col(j) += (OuterMap(plant, pd, xp, u0, phase) - OuterMap(plant, pd, xm, u0, phase)) / (2.0 * h);
    }
    for (int j = 0; j < kAugDim; ++j) {
      AugVec up = u0, um = u0;
      up(j) += h;
      um(j) -= h;
      B.col(j) += (OuterMap(plant, pd, x0, up, phase) - OuterMap(plant, pd, x0, um, phase)) / (2.0 * h);
    }
  }
  A /= static_cast<double>(phases.size());
  B /= static_cast<double>(phases.size());
}

LqrDesign DesignLqr(const DynamicsModel& plant, const PhysicalParams& params, const PdGains& pd,
                    const LqrWeights& weights) {
  LqrDesign d;
  NearHoverLinearization(plant, params, pd, d.A, d.B);
  d.Q = weights.Q();
  d.R = weights.R();
  RiccatiSolution sol = SolveRiccati(d.A, d.B, d.Q, d.R);
  d.K = sol.K;
  d.P = sol.P;
  d.iterations = sol.iterations;
  d.spectral_radius = SpectralRadius(d.A + d.B * d.K);
  return d;
}

StateVec RotateError(const StateVec& err, double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  StateVec out = err;
  out(kPos + 0) = c * err(kPos + 0) + s * err(kPos + 1);
  out(kPos + 1) = -s * err(kPos + 0) + c * err(kPos + 1);
  out(kVel + 0) = c * err(kVel + 0) + s * err(kVel + 1);
  out(kVel + 1) = -s * err(kVel + 0) + c * err(kVel + 1);
  return out;
}

FeedbackResult OuterFeedback(const StateVec& ref_state, const AugmentedInput& ref_input,
                             const State& measured, const Eigen::MatrixXd& K,
                             const InputLimits& limits) {
  const StateVec err = StateDifference(measured.ToVector(), ref_state);
  const StateVec rotated = RotateError(err, measured.zeta(2));
  AugVec u = ref_input.ToVector() + K * rotated;
  FeedbackResult out;
  u(0) = Clamp(u(0), 0.0, limits.u1_max, out.clamped);
  u(1) = Clamp(u(1), -limits.tilt_cmd_max, limits.tilt_cmd_max, out.clamped);
  u(2) = Clamp(u(2), -limits.tilt_cmd_max, limits.tilt_cmd_max, out.clamped);
  u(3) = WrapAngle(u(3));
  for (int i = 4; i < 7; ++i) u(i) = Clamp(u(i), -limits.rate_cmd_max, limits.rate_cmd_max, out.clamped);
  out.input = AugmentedInput::FromVector(u);
  return out;
}

const char* FlightModeName(FlightMode mode) {
  return mode == FlightMode::kNnModel ? "nn_model" : "model_free";
}

FlightMode ParseFlightMode(const std::string& name) {
  if (name == "nn_model") return FlightMode::kNnModel;
  if (name == "model_free") return FlightMode::kModelFree;
  throw Error(ErrorCode::kInvalidArgument, "unknown flight mode '" + name + "'");
}

Reference ModelFreeReference(const std::vector<StateVec>& desired, double dt,
                             const PhysicalParams& params, const PdGains& gains) {
  if (desired.size() < 2) throw Error(ErrorCode::kInvalidArgument, "reference needs at least 2 states");
  Reference ref;
  ref.dt = dt;
  ref.states = desired;
  ref.inputs.reserve(desired.size() - 1);
  for (size_t n = 0; n + 1 < desired.size(); ++n) {
    ref.inputs.push_back(AugmentInput(params.HoverInput(), State::FromVector(desired[n]), gains));
  }
  return ref;
}

Reference PlannedReference(const std::vector<StateVec>& states, const std::vector<InputVec>& inputs,
                           double dt, const PdGains& gains) {
  if (states.size() < 2 || inputs.size() + 1 != states.size()) {
    throw Error(ErrorCode::kLengthMismatch, "planned reference needs N+1 states and N inputs");
  }
  Reference ref;
  ref.dt = dt;
  ref.states = states;
  ref.inputs.reserve(inputs.size());
  for (size_t n = 0; n < inputs.size(); ++n) {
    ref.inputs.push_back(
        AugmentInput(RotorInput::FromVector(inputs[n]), State::FromVector(states[n]), gains));
  }
  return ref;
}

FlightLog Fly(const Reference& ref, const FlightConfig& cfg, FlightMode mode,
              const std::vector<AugVec>* excitation) {
  if (ref.steps() < 1 || ref.states.size() != ref.inputs.size() + 1) {
    throw Error(ErrorCode::kInvalidArgument, "reference needs N+1 states and N >= 1 inputs");
  }
  if (std::abs(ref.dt - kOuterDt) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "reference dt must equal the 10 ms outer period");
  }
  if (excitation && excitation->size() < ref.inputs.size()) {
    throw Error(ErrorCode::kLengthMismatch, "excitation shorter than the reference");
  }
  if (cfg.K.rows() != kAugDim || cfg.K.cols() != kStateDim) {
    throw Error(ErrorCode::kDimensionMismatch, "feedback gain must be 7 x 12");
  }
  constexpr int kTicksPerOuter = 5;
  constexpr int kTicksPerInner = 2;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const NoiseConfig& nz = cfg.noise;
  const bool sensor_noise = nz.sensor_pos_std > 0 || nz.sensor_vel_std > 0 ||
                            nz.sensor_att_std > 0 || nz.sensor_rate_std > 0;
  const bool actuation_noise = nz.thrust_std > 0 || nz.torque_std > 0;
  auto measure = [&](const State& s) {
    if (!sensor_noise) return s;
    State m = s;
    for (int i = 0; i < 3; ++i) {
      m.p(i) += nz.sensor_pos_std * normal(rng);
      m.v(i) += nz.sensor_vel_std * normal(rng);
      m.zeta(i) = WrapAngle(m.zeta(i) + nz.sensor_att_std * normal(rng));
      m.omega(i) += nz.sensor_rate_std * normal(rng);
    }
    return m;
  };

  FlightLog log;
  log.dt = ref.dt;
  log.provenance = FlightModeName(mode);
  log.rows.reserve(ref.inputs.size());

  State s = State::FromVector(ref.states.front());
  AugmentedInput uhat;
  RotorInput applied;
  bool clamped_outer = false;
  bool clamped_inner = false;
  const int total_ticks = ref.steps() * kTicksPerOuter;
  for (int tick = 0; tick < total_ticks; ++tick) {
    const bool outer = tick % kTicksPerOuter == 0;
    const int n = tick / kTicksPerOuter;
    if (outer) {
      AugmentedInput feedforward = ref.inputs[static_cast<size_t>(n)];
      if (excitation) {
        feedforward = AugmentedInput::FromVector(feedforward.ToVector() + (*excitation)[static_cast<size_t>(n)]);
      }
      FeedbackResult fb = OuterFeedback(ref.states[static_cast<size_t>(n)], feedforward, measure(s),
                                        cfg.K, cfg.limits);
      uhat = fb.input;
      clamped_outer = fb.clamped;
    }
    const int local = tick % kTicksPerOuter;
    if (local % kTicksPerInner == 0 && !(n % 2 == 1 && local == 4)) {
      const State m = measure(s);
      RotorInput cmd = InnerPd(uhat, m, cfg.pd, cfg.limits);
      const Vec3 moments = PdMoments(uhat, m, cfg.pd);
      clamped_inner = cmd.u1 != uhat.u1 || cmd.torque != moments;
      if (actuation_noise) {
        cmd.u1 = std::clamp(cmd.u1 + nz.thrust_std * normal(rng), 0.0, cfg.limits.u1_max);
        for (int i = 0; i < 3; ++i) {
          cmd.torque(i) = std::clamp(cmd.torque(i) + nz.torque_std * normal(rng),
                                     -cfg.limits.torque_max, cfg.limits.torque_max);
        }
      }
      applied = cmd;
    }
    if (outer) {
      FlightRow row;
      row.t = n * ref.dt;
      row.state = s.ToVector();
      row.aug = uhat;
      row.applied = applied;
      row.accel = GroundTruthAccel(s, applied, cfg.params);
      row.clamped_outer = clamped_outer;
      row.clamped_inner = clamped_inner;
      log.rows.push_back(row);
    }
    try {
      s = SimulateFine(s, applied, cfg.params, kBaseDt, cfg.params.substeps);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEnvelopeViolation && e.code() != ErrorCode::kSingularAttitude) throw;
      log.crashed = true;
      log.crash_time = (tick + 1) * kBaseDt;
      log.crash_reason = e.what();
      break;
    }
  }
  return log;
}

ErrorReport TrackingError(const std::vector<StateVec>& log_states, double log_dt,
                          const std::vector<StateVec>& desired, double desired_dt) {
  if (std::abs(log_dt - desired_dt) > 1e-12) {
    throw Error(ErrorCode::kLengthMismatch, "log and desired trajectory use different time steps");
  }
  if (log_states.empty() || log_states.size() > desired.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "log has " + std::to_string(log_states.size()) + " rows, desired has " +
                    std::to_string(desired.size()));
  }
  ErrorReport rep;
  rep.samples = static_cast<int>(log_states.size());
  rep.abs_error.reserve(log_states.size());
  std::array<double, 6> sq{};
  double pos_sq = 0.0;
  for (size_t n = 0; n < log_states.size(); ++n) {
    const StateVec d = StateDifference(log_states[n], desired[n]);
    std::array<double, 6> e{};
    for (int c = 0; c < 3; ++c) {
      e[static_cast<size_t>(c)] = std::abs(d(kPos + c));
      e[static_cast<size_t>(3 + c)] = std::abs(d(kAtt + c));
    }
    for (size_t c = 0; c < 6; ++c) {
      sq[c] += e[c] * e[c];
      rep.max[c] = std::max(rep.max[c], e[c]);
    }
    const double pn = d.segment<3>(kPos).squaredNorm();
    pos_sq += pn;
    rep.max_position = std::max(rep.max_position, std::sqrt(pn));
    rep.abs_error.push_back(e);
  }
  for (size_t c = 0; c < 6; ++c) rep.rms[c] = std::sqrt(sq[c] / rep.samples);
  rep.rms_position = std::sqrt(pos_sq / rep.samples);
  return rep;
}

}  // namespace nnquad
