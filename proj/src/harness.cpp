#include "nnquad/harness.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "nnquad/csv.hpp"
#include "nnquad/errors.hpp"

namespace nnquad {

const char* ManeuverKindName(ManeuverKind kind) {
  switch (kind) {
    case ManeuverKind::kSinusoidXY: return "SinusoidXY";
    case ManeuverKind::kSinusoidXZ: return "SinusoidXZ";
    case ManeuverKind::kSinusoidYZ: return "SinusoidYZ";
    case ManeuverKind::kYawSpin: return "YawSpin";
    case ManeuverKind::kRandomExcitation: return "RandomExcitation";
  }
  return "?";
}

ManeuverKind ParseManeuverKind(const std::string& name) {
  for (auto k : {ManeuverKind::kSinusoidXY, ManeuverKind::kSinusoidXZ, ManeuverKind::kSinusoidYZ,
                 ManeuverKind::kYawSpin, ManeuverKind::kRandomExcitation}) {
    if (name == ManeuverKindName(k)) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown maneuver kind '" + name + "'");
}

namespace {

int StepCount(double duration, double dt) {
  return static_cast<int>(std::lround(duration / dt));
}

// Heading of a RandomExcitation flight, drawn from its seed.
double ExcitationHeading(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  return WrapAngle(heading(rng));
}

}  // namespace

DesiredTrajectory GenerateManeuver(const ManeuverSpec& spec, double dt,
                                   const ManeuverEnvelope& envelope) {
  if (!(spec.duration > 0.0)) throw Error(ErrorCode::kInvalidArgument, "duration must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  const bool sinusoid = spec.kind == ManeuverKind::kSinusoidXY ||
                        spec.kind == ManeuverKind::kSinusoidXZ ||
                        spec.kind == ManeuverKind::kSinusoidYZ;
  const double omega = 2.0 * std::numbers::pi * spec.frequency;
  if (sinusoid) {
    if (spec.amplitude < 0.0 || spec.frequency < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "amplitude and frequency must be non-negative");
    }
    if (spec.frequency > envelope.max_frequency) {
      throw Error(ErrorCode::kInvalidArgument, "frequency above the maneuver envelope");
    }
    if (spec.amplitude * omega * omega > envelope.max_accel) {
      throw Error(ErrorCode::kEnvelopeViolation, "peak acceleration " +
                                                     std::to_string(spec.amplitude * omega * omega) +
                                                     " m/s^2 exceeds the envelope");
    }
  }
  if (spec.kind == ManeuverKind::kYawSpin && std::abs(spec.yaw_rate) > envelope.max_yaw_rate) {
    throw Error(ErrorCode::kEnvelopeViolation, "yaw rate exceeds the envelope");
  }

  DesiredTrajectory traj;
  traj.dt = dt;
  const int n = StepCount(spec.duration, dt);
  traj.states.reserve(static_cast<size_t>(n) + 1);
  const double heading =
      spec.kind == ManeuverKind::kRandomExcitation ? ExcitationHeading(spec.seed) : 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    StateVec x = StateVec::Zero();
    const double a = spec.amplitude * std::sin(omega * t);
    const double b = spec.amplitude * (1.0 - std::cos(omega * t));
    const double da = spec.amplitude * omega * std::cos(omega * t);
    const double db = spec.amplitude * omega * std::sin(omega * t);
    int i = -1, j = -1;
    switch (spec.kind) {
      case ManeuverKind::kSinusoidXY: i = 0; j = 1; break;
      case ManeuverKind::kSinusoidXZ: i = 0; j = 2; break;
      case ManeuverKind::kSinusoidYZ: i = 1; j = 2; break;
      case ManeuverKind::kYawSpin:
        x(kAtt + 2) = WrapAngle(spec.yaw_rate * t);
        x(kRate + 2) = spec.yaw_rate;
        break;
      case ManeuverKind::kRandomExcitation:
        x(kAtt + 2) = heading;
        break;
    }
    if (i >= 0) {
      x(kPos + i) = a;
      x(kPos + j) = b;
      x(kVel + i) = da;
      x(kVel + j) = db;
    }
    traj.states.push_back(x);
  }
  return traj;
}

DesiredTrajectory SinusoidYawTrajectory(double amplitude, double frequency, double duration,
                                        double yaw_total, double dt) {
  ManeuverSpec spec;
  spec.kind = ManeuverKind::kSinusoidXY;
  spec.amplitude = amplitude;
  spec.frequency = frequency;
  spec.duration = duration;
  ManeuverEnvelope loose;
  loose.max_frequency = std::numeric_limits<double>::infinity();
  loose.max_accel = std::numeric_limits<double>::infinity();
  DesiredTrajectory traj = GenerateManeuver(spec, dt, loose);
  const double rate = yaw_total / duration;
  for (size_t k = 0; k < traj.states.size(); ++k) {
    traj.states[k](kAtt + 2) = WrapAngle(rate * static_cast<double>(k) * dt);
    traj.states[k](kRate + 2) = rate;
  }
  return traj;
}

std::vector<AugVec> ExcitationSequence(std::uint64_t seed, int steps, double dt,
                                       const PhysicalParams& params, const ExcitationConfig& cfg) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = std::exp(-dt / cfg.time_constant);
  const double drive = std::sqrt(1.0 - a * a);
  const Eigen::Vector3d sigma(cfg.thrust_std * params.HoverThrust(), cfg.tilt_std, cfg.tilt_std);
  Eigen::Vector3d e = Eigen::Vector3d::Zero();
  std::vector<AugVec> seq;
  seq.reserve(static_cast<size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < 3; ++i) e(i) = a * e(i) + drive * sigma(i) * normal(rng);
    AugVec u = AugVec::Zero();
    u.head<3>() = e;
    seq.push_back(u);
  }
  return seq;
}

std::vector<ManeuverSpec> DefaultSuite(double total_seconds) {
  std::vector<ManeuverSpec> suite;
  const std::vector<std::pair<double, double>> planar = {{0.5, 0.2}, {0.25, 0.3}, {0.8, 0.1}, {0.15, 0.4}};
  const std::vector<std::pair<double, double>> vertical = {{0.5, 0.2}, {0.3, 0.4}, {0.8, 0.1}, {0.4, 0.3}};
  for (auto kind : {ManeuverKind::kSinusoidXY, ManeuverKind::kSinusoidXZ, ManeuverKind::kSinusoidYZ}) {
    for (auto [amp, freq] : kind == ManeuverKind::kSinusoidXY ? planar : vertical) {
      ManeuverSpec s;
      s.kind = kind;
      s.amplitude = amp;
      s.frequency = freq;
      suite.push_back(s);
    }
  }
  for (double rate : {0.5, -0.5, 1.0, -1.0, 1.5, -1.5}) {
    ManeuverSpec s;
    s.kind = ManeuverKind::kYawSpin;
    s.yaw_rate = rate;
    suite.push_back(s);
  }
  const double scripted = static_cast<double>(suite.size());
  for (auto& s : suite) s.duration = 0.75 * total_seconds / scripted;
  // Random excitation: a quarter of the corpus, over short flights at random headings.
  constexpr int kExcitationFlights = 24;
  for (std::uint64_t seed = 1; seed <= kExcitationFlights; ++seed) {
    ManeuverSpec s;
    s.kind = ManeuverKind::kRandomExcitation;
    s.seed = seed;
    s.duration = 0.25 * total_seconds / kExcitationFlights;
    suite.push_back(s);
  }
  return suite;
}

CollectResult Collect(const std::vector<ManeuverSpec>& specs, const CollectConfig& cfg) {
  if (specs.empty()) throw Error(ErrorCode::kConfigError, "no maneuvers");
  CollectResult result;
  const double dt = kOuterDt;
  for (size_t i = 0; i < specs.size(); ++i) {
    const ManeuverSpec& spec = specs[i];
    const DesiredTrajectory desired = GenerateManeuver(spec, dt, cfg.envelope);
    const Reference ref = ModelFreeReference(desired.states, dt, cfg.flight.params, cfg.flight.pd);
    FlightConfig fc = cfg.flight;
    fc.seed = cfg.seed * 1000003ULL + i;
    std::vector<AugVec> excitation;
    if (spec.kind == ManeuverKind::kRandomExcitation) {
      excitation = ExcitationSequence(spec.seed + cfg.seed * 7919ULL, ref.steps(), dt, fc.params,
                                      cfg.excitation);
    }
    FlightLog log = Fly(ref, fc, FlightMode::kModelFree, excitation.empty() ? nullptr : &excitation);
    log.provenance = std::string(ManeuverKindName(spec.kind)) + " #" + std::to_string(i);
    if (log.crashed) ++result.crashed;
    result.logs.push_back(std::move(log));
  }
  return result;
}

DatasetPair BuildDatasets(const std::vector<FlightLog>& logs, const PdGains& pd,
                          const InputLimits& limits, const DatasetOptions& opts) {
  if (logs.empty()) throw Error(ErrorCode::kDegenerateData, "no flight logs");
  struct Sample {
    State s;
    RotorInput u;
    Accelerations target;
  };
  std::vector<Sample> samples;
  for (const auto& log : logs) {
    const size_t usable = opts.targets == TargetMode::kFiniteDifference && !log.rows.empty()
                              ? log.rows.size() - 1
                              : log.rows.size();
    for (size_t n = 0; n < usable; ++n) {
      const FlightRow& row = log.rows[n];
      Sample smp;
      smp.s = State::FromVector(row.state);
      smp.u = InnerPd(row.aug, smp.s, pd, limits);
      if (opts.targets == TargetMode::kTrueAccel) {
        smp.target = row.accel;
      } else {
        const StateVec& next = log.rows[n + 1].state;
        smp.target.fv = (next.segment<3>(kVel) - row.state.segment<3>(kVel)) / log.dt;
        smp.target.fw = (next.segment<3>(kRate) - row.state.segment<3>(kRate)) / log.dt;
      }
      samples.push_back(smp);
    }
  }
  const auto total = static_cast<Eigen::Index>(samples.size());
  if (total == 0) throw Error(ErrorCode::kDegenerateData, "flight logs contain no rows");
  const std::vector<Split> split = AssignSplits(total, opts.train_frac, opts.val_frac, opts.seed);

  DatasetPair out;
  auto fill = [&](Dataset& d, FeatureKind kind) {
    d.kind = kind;
    d.features.resize(FeatureDim(kind), total);
    d.targets.resize(3, total);
    d.split = split;
    for (Eigen::Index i = 0; i < total; ++i) {
      const Sample& smp = samples[static_cast<size_t>(i)];
      d.features.col(i) = Featurize(smp.s, smp.u, kind);
      d.targets.col(i) = kind == FeatureKind::kTranslational ? smp.target.fv : smp.target.fw;
    }
    d.FitNormalization();
  };
  fill(out.translational, FeatureKind::kTranslational);
  fill(out.rotational, FeatureKind::kRotational);
  return out;
}

CoverageAudit AuditCoverage(const std::vector<FlightLog>& logs, double v_thresh, double wz_thresh) {
  CoverageAudit audit;
  for (const auto& log : logs) {
    for (const auto& row : log.rows) {
      ++audit.rows;
      const bool moving = row.state.segment<3>(kVel).norm() >= v_thresh;
      const bool yawing = std::abs(row.state(kRate + 2)) >= wz_thresh;
      if (moving && yawing) ++audit.violations;
    }
  }
  return audit;
}

namespace {

std::vector<std::string> FlightLogHeader() {
  std::vector<std::string> h = {"t"};
  for (auto& c : StateColumnNames()) h.push_back(c);
  for (const char* c : {"uh1", "phi_des", "theta_des", "psi_des", "wx_des", "wy_des", "wz_des",
                        "u1", "u2", "u3", "u4", "ax", "ay", "az", "alpha_x", "alpha_y", "alpha_z",
                        "clamp_outer", "clamp_inner"}) {
    h.push_back(c);
  }
  return h;
}

}  // namespace

void WriteFlightLogCsv(const std::filesystem::path& path, const FlightLog& log) {
  CsvTable table;
  table.header = FlightLogHeader();
  table.rows.reserve(log.rows.size());
  for (const auto& r : log.rows) {
    std::vector<double> row;
    row.reserve(table.header.size());
    row.push_back(r.t);
    for (int i = 0; i < kStateDim; ++i) row.push_back(r.state(i));
    const AugVec a = r.aug.ToVector();
    for (int i = 0; i < kAugDim; ++i) row.push_back(a(i));
    const InputVec u = r.applied.ToVector();
    for (int i = 0; i < kInputDim; ++i) row.push_back(u(i));
    for (int i = 0; i < 3; ++i) row.push_back(r.accel.fv(i));
    for (int i = 0; i < 3; ++i) row.push_back(r.accel.fw(i));
    row.push_back(r.clamped_outer ? 1.0 : 0.0);
    row.push_back(r.clamped_inner ? 1.0 : 0.0);
    table.rows.push_back(std::move(row));
  }
  WriteCsv(path, table);
}

FlightLog ReadFlightLogCsv(const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  if (table.header != FlightLogHeader()) {
    throw Error(ErrorCode::kIoError, path.string() + ": not a flight log (header mismatch)");
  }
  FlightLog log;
  for (const auto& row : table.rows) {
    FlightRow r;
    size_t c = 0;
    r.t = row[c++];
    for (int i = 0; i < kStateDim; ++i) r.state(i) = row[c++];
    AugVec a;
    for (int i = 0; i < kAugDim; ++i) a(i) = row[c++];
    r.aug = AugmentedInput::FromVector(a);
    InputVec u;
    for (int i = 0; i < kInputDim; ++i) u(i) = row[c++];
    r.applied = RotorInput::FromVector(u);
    for (int i = 0; i < 3; ++i) r.accel.fv(i) = row[c++];
    for (int i = 0; i < 3; ++i) r.accel.fw(i) = row[c++];
    r.clamped_outer = row[c++] != 0.0;
    r.clamped_inner = row[c++] != 0.0;
    log.rows.push_back(r);
  }
  if (log.rows.size() >= 2) log.dt = log.rows[1].t - log.rows[0].t;
  return log;
}

}  // namespace nnquad
