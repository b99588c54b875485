#include "nnquad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "nnquad/csv.hpp"
#include "nnquad/errors.hpp"
#include "nnquad/plot.hpp"

namespace fs = std::filesystem;

namespace nnquad {
namespace {

const char* kTransModel = "translational.model";
const char* kRotModel = "rotational.model";

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "cannot create directory " + dir.string());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::string Join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

void WriteManifest(const fs::path& dir, const RunConfig& cfg, const std::vector<std::string>& stages) {
  KeyValues kv = {{"tool_version", kToolVersion},
                  {"seed", std::to_string(cfg.seed)},
                  {"config", cfg.sources.empty() ? "defaults" : Join(cfg.sources, ";")},
                  {"stages", Join(stages, ",")},
                  {"output_dir", dir.string()}};
  WriteKeyValues(dir / "manifest.txt", kv);
  WriteText(dir / "config.ini", DumpRunConfig(cfg));
}

std::string Fmt(double v) { return FormatDouble(v); }

FlightConfig MakeFlightConfig(const RunConfig& cfg) {
  FlightConfig fc;
  fc.params = cfg.plant;
  fc.pd = cfg.pd;
  fc.limits = cfg.limits;
  fc.noise = cfg.noise;
  fc.seed = DeriveSeed(cfg.seed, SeedStream::kFlight);
  const LqrDesign design = DesignLqr(GroundTruthModel{cfg.plant}, cfg.plant, cfg.pd, cfg.lqr);
  fc.K = design.K;
  return fc;
}

std::vector<StateVec> LogStates(const FlightLog& log) {
  std::vector<StateVec> out;
  out.reserve(log.rows.size());
  for (const auto& r : log.rows) out.push_back(r.state);
  return out;
}

void WriteErrorOutputs(const fs::path& dir, const std::string& prefix, const ErrorReport& rep,
                       double dt, const FlightLog* log) {
  CsvTable table;
  table.header = {"t", "x", "y", "z", "phi", "theta", "psi"};
  for (size_t n = 0; n < rep.abs_error.size(); ++n) {
    std::vector<double> row = {static_cast<double>(n) * dt};
    row.insert(row.end(), rep.abs_error[n].begin(), rep.abs_error[n].end());
    table.rows.push_back(std::move(row));
  }
  WriteCsv(dir / (prefix + "_error.csv"), table);
  const char* names[6] = {"x", "y", "z", "phi", "theta", "psi"};
  KeyValues kv = {{"samples", std::to_string(rep.samples)},
                  {"rms_position", Fmt(rep.rms_position)},
                  {"max_position", Fmt(rep.max_position)}};
  for (int c = 0; c < 6; ++c) {
    kv.push_back({std::string("rms_") + names[c], Fmt(rep.rms[static_cast<size_t>(c)])});
    kv.push_back({std::string("max_") + names[c], Fmt(rep.max[static_cast<size_t>(c)])});
  }
  if (log) {
    kv.push_back({"crashed", log->crashed ? "true" : "false"});
    if (log->crashed) {
      kv.push_back({"crash_time", Fmt(log->crash_time)});
      kv.push_back({"crash_reason", log->crash_reason});
    }
  }
  WriteKeyValues(dir / (prefix + "_error_summary.txt"), kv);
}

PlotSeries Series(const std::string& label, std::vector<double> x, std::vector<double> y,
                  const std::string& color, bool dashed = false) {
  PlotSeries s;
  s.label = label;
  s.x = std::move(x);
  s.y = std::move(y);
  s.color = color;
  s.dashed = dashed;
  return s;
}

PlotSeries PathSeries(const std::string& label, const std::vector<StateVec>& states,
                      const std::string& color, bool dashed = false) {
  std::vector<double> x, y;
  for (const auto& s : states) {
    x.push_back(s(kPos + 1));
    y.push_back(s(kPos + 0));
  }
  return Series(label, x, y, color, dashed);
}

PlotSeries ErrorSeries(const std::string& label, const ErrorReport& rep, double dt,
                       const std::string& color) {
  std::vector<double> t, e;
  for (size_t n = 0; n < rep.abs_error.size(); ++n) {
    t.push_back(static_cast<double>(n) * dt);
    const auto& a = rep.abs_error[n];
    e.push_back(std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]));
  }
  return Series(label, t, e, color);
}

std::vector<FlightLog> ReadLogs(const fs::path& data_dir) {
  fs::path logs_dir = data_dir / "logs";
  if (!fs::is_directory(logs_dir)) logs_dir = data_dir;
  if (!fs::is_directory(logs_dir)) throw Error(ErrorCode::kIoError, "no log directory at " + data_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(logs_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kIoError, "no flight logs in " + logs_dir.string());
  std::vector<FlightLog> logs;
  for (const auto& f : files) logs.push_back(ReadFlightLogCsv(f));
  return logs;
}

TrainConfig NetConfig(const RunConfig& cfg, SeedStream stream, int passes) {
  TrainConfig tc = cfg.train;
  tc.seed = DeriveSeed(cfg.seed, stream);
  tc.nominal_learning_rate = tc.rprop.delta0;
  if (passes >= 0) tc.passes = passes;
  return tc;
}

fs::path ResolveModelDir(const fs::path& dir) {
  if (fs::exists(dir / kTransModel)) return dir;
  if (fs::exists(dir / "models" / kTransModel)) return dir / "models";
  throw Error(ErrorCode::kIoError, "no " + std::string(kTransModel) + " in " + dir.string());
}

struct TrainOutputs {
  TrainResult trans;
  TrainResult rot;
};

TrainOutputs TrainAndWrite(const RunConfig& cfg, const std::vector<FlightLog>& logs,
                           const fs::path& out_dir, int passes) {
  EnsureDir(out_dir / "datasets");
  EnsureDir(out_dir / "models");
  DatasetOptions opts = cfg.dataset;
  opts.seed = DeriveSeed(cfg.seed, SeedStream::kSplit);
  const DatasetPair data = BuildDatasets(logs, cfg.pd, cfg.limits, opts);
  SaveDatasetCsv(data.translational, out_dir / "datasets" / "translational.csv");
  SaveDatasetCsv(data.rotational, out_dir / "datasets" / "rotational.csv");

  TrainOutputs out;
  out.trans = Train(data.translational, NetConfig(cfg, SeedStream::kTrainTrans, passes));
  out.rot = Train(data.rotational, NetConfig(cfg, SeedStream::kTrainRot, passes));
  SaveModel(out.trans.net, out_dir / "models" / kTransModel);
  SaveModel(out.rot.net, out_dir / "models" / kRotModel);

  CsvTable hist;
  hist.header = {"epoch",    "trans_loss", "trans_train_mse", "trans_val_mse",
                 "rot_loss", "rot_train_mse", "rot_val_mse"};
  for (size_t e = 0; e < out.trans.history.size(); ++e) {
    const EpochRecord& a = out.trans.history[e];
    const EpochRecord& b = out.rot.history[e];
    hist.rows.push_back({static_cast<double>(a.epoch), a.loss, a.train_mse, a.val_mse, b.loss,
                         b.train_mse, b.val_mse});
  }
  WriteCsv(out_dir / "train_history.csv", hist);

  const TrainConfig tc = NetConfig(cfg, SeedStream::kTrainTrans, passes);
  KeyValues kv = {{"translational_train_mse", Fmt(out.trans.train_mse)},
                  {"translational_val_mse", Fmt(out.trans.val_mse)},
                  {"translational_test_mse", Fmt(out.trans.test_mse)},
                  {"translational_best_epoch", std::to_string(out.trans.best_epoch)},
                  {"rotational_train_mse", Fmt(out.rot.train_mse)},
                  {"rotational_val_mse", Fmt(out.rot.val_mse)},
                  {"rotational_test_mse", Fmt(out.rot.test_mse)},
                  {"rotational_best_epoch", std::to_string(out.rot.best_epoch)},
                  {"samples", std::to_string(data.translational.size())},
                  {"passes", std::to_string(tc.passes)},
                  {"hidden_units", std::to_string(tc.hidden_units)},
                  {"rprop_initial_step", Fmt(tc.rprop.delta0)},
                  {"nominal_learning_rate", Fmt(tc.nominal_learning_rate)},
                  {"nominal_momentum_ignored", Fmt(tc.nominal_momentum)}};
  WriteKeyValues(out_dir / "mse_summary.txt", kv);

  PlotSpec plot;
  plot.title = "Training history (normalized MSE)";
  plot.x_label = "epoch";
  plot.y_label = "MSE";
  std::vector<double> ep, ttr, tva, rtr, rva;
  for (const auto& row : hist.rows) {
    ep.push_back(row[0]);
    ttr.push_back(row[2]);
    tva.push_back(row[3]);
    rtr.push_back(row[5]);
    rva.push_back(row[6]);
  }
  plot.series = {Series("trans train", ep, ttr, "#1f77b4"), Series("trans val", ep, tva, "#1f77b4", true),
                 Series("rot train", ep, rtr, "#d62728"), Series("rot val", ep, rva, "#d62728", true)};
  WriteSvg(out_dir / "train_history.svg", plot);
  return out;
}

struct PlanOutputs {
  PlanResult result;
  double infeasibility = 0.0;
  double rollout_deviation = 0.0;
};

PlanOutputs PlanAndWrite(const RunConfig& cfg, const DynamicsModel& model, const DesiredTrajectory& desired,
                         const fs::path& out_dir, const std::string& model_name) {
  EnsureDir(out_dir);
  PlanOutputs out;
  out.result = PlanTrajectoryFor(model, cfg.plant, desired, cfg.scp);
  const PlanResult& r = out.result;

  DesiredTrajectory planned;
  planned.dt = desired.dt;
  planned.states = ToStates(r.ref_states);
  const std::vector<InputVec> inputs = ToInputs(r.ref_inputs);
  WriteTrajectoryCsv(out_dir / "plan.csv", planned, &inputs);

  CsvTable hist;
  hist.header = {"iteration", "round", "mu", "merit", "predicted", "actual", "accepted", "trust_state",
                 "trust_input"};
  for (size_t i = 0; i < r.history.size(); ++i) {
    const ScpIteration& h = r.history[i];
    hist.rows.push_back({static_cast<double>(i), static_cast<double>(h.round), h.mu, h.merit, h.predicted,
                         h.actual, h.accepted ? 1.0 : 0.0, h.trust_state, h.trust_input});
  }
  WriteCsv(out_dir / "plan_history.csv", hist);

  const QuadrotorPlanningModel pm(model, cfg.plant);
  std::vector<Eigen::VectorXd> des;
  for (const auto& s : desired.states) des.push_back(s);
  // Open-loop rollouts of a learned model can diverge; that reads as infinite.
  const double diverged = std::numeric_limits<double>::infinity();
  try {
    out.infeasibility = InfeasibilityMeasure(pm, des, cfg.scp.squared_tracking);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularAttitude) throw;
    out.infeasibility = diverged;
  }
  try {
    const auto rolled = RolloutInputs(pm, r.ref_states.front(), r.ref_inputs);
    for (size_t n = 0; n < rolled.size(); ++n) {
      out.rollout_deviation =
          std::max(out.rollout_deviation, pm.Difference(rolled[n], r.ref_states[n]).cwiseAbs().maxCoeff());
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularAttitude) throw;
    out.rollout_deviation = diverged;
  }

  std::string rv;
  for (double v : r.round_violation) rv += (rv.empty() ? "" : ",") + Fmt(v);
  KeyValues kv = {{"model", model_name},
                  {"converged", r.converged ? "true" : "false"},
                  {"objective", Fmt(r.objective)},
                  {"max_violation", Fmt(r.max_violation)},
                  {"feas_tol", Fmt(cfg.scp.feas_tol)},
                  {"rollout_deviation", Fmt(out.rollout_deviation)},
                  {"desired_infeasibility", Fmt(out.infeasibility)},
                  {"iterations", std::to_string(r.iterations)},
                  {"penalty_rounds", std::to_string(r.penalty_rounds)},
                  {"final_penalty", Fmt(r.final_penalty)},
                  {"round_violation", rv},
                  {"horizon", std::to_string(desired.horizon())}};
  WriteKeyValues(out_dir / "plan_report.txt", kv);
  return out;
}

struct FlightOutputs {
  FlightLog log;
  ErrorReport error;
};

FlightOutputs FlyAndWrite(const FlightConfig& fc, const Reference& ref, FlightMode mode,
                          const std::vector<StateVec>& target, double dt, const fs::path& dir,
                          const std::string& prefix) {
  FlightOutputs out;
  out.log = Fly(ref, fc, mode);
  WriteFlightLogCsv(dir / (prefix + "_log.csv"), out.log);
  out.error = TrackingError(LogStates(out.log), dt, target, dt);
  WriteErrorOutputs(dir, prefix, out.error, dt, &out.log);
  return out;
}

// Re-throws with the stage name in front of the message.
template <typename F>
auto RunStage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(ErrorCodeName(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    throw Error(e.code(), std::string("[") + stage + "] " + what);
  }
}

}  // namespace

DesiredTrajectory TaskTrajectory(const RunConfig& cfg) {
  return SinusoidYawTrajectory(cfg.task_amplitude, cfg.task_frequency, cfg.task_duration, cfg.task_yaw_total,
                               cfg.plant.dt);
}

StageOutcome RunCollect(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.Validate();
  const std::vector<ManeuverSpec> suite = cfg.Suite();
  if (suite.empty()) throw Error(ErrorCode::kConfigError, "no maneuvers");
  EnsureDir(out_dir / "logs");
  CollectConfig cc;
  cc.flight = MakeFlightConfig(cfg);
  cc.excitation = cfg.excitation;
  cc.envelope = cfg.envelope;
  cc.seed = DeriveSeed(cfg.seed, SeedStream::kCollect);
  const CollectResult res = Collect(suite, cc);

  CsvTable index;
  index.header = {"index", "kind", "amplitude", "frequency", "duration", "yaw_rate", "seed", "rows", "crashed"};
  long rows = 0;
  for (size_t i = 0; i < res.logs.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%03zu_%s.csv", i, ManeuverKindName(suite[i].kind));
    WriteFlightLogCsv(out_dir / "logs" / name, res.logs[i]);
    rows += static_cast<long>(res.logs[i].rows.size());
    const ManeuverSpec& s = suite[i];
    index.rows.push_back({static_cast<double>(i), static_cast<double>(static_cast<int>(s.kind)), s.amplitude,
                          s.frequency, s.duration, s.yaw_rate, static_cast<double>(s.seed),
                          static_cast<double>(res.logs[i].rows.size()), res.logs[i].crashed ? 1.0 : 0.0});
  }
  WriteCsv(out_dir / "maneuvers.csv", index);
  const CoverageAudit audit = AuditCoverage(res.logs);
  KeyValues kv = {{"maneuvers", std::to_string(suite.size())},
                  {"rows", std::to_string(rows)},
                  {"crashed", std::to_string(res.crashed)},
                  {"audit_rows", std::to_string(audit.rows)},
                  {"audit_violations", std::to_string(audit.violations)}};
  WriteKeyValues(out_dir / "collect_report.txt", kv);
  WriteManifest(out_dir, cfg, {"collect"});

  StageOutcome out;
  out.status = res.crashed > 0 ? StageStatus::kCrash : StageStatus::kOk;
  out.summary = "collect: " + std::to_string(suite.size()) + " maneuvers, " + std::to_string(rows) +
                " rows, " + std::to_string(res.crashed) + " crashed, coverage violations " +
                std::to_string(audit.violations);
  return out;
}

StageOutcome RunTrain(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, int passes) {
  cfg.Validate();
  const std::vector<FlightLog> logs = ReadLogs(data_dir);
  EnsureDir(out_dir);
  const TrainOutputs t = TrainAndWrite(cfg, logs, out_dir, passes);
  WriteManifest(out_dir, cfg, {"train"});
  StageOutcome out;
  std::ostringstream os;
  os << "train: translational mse train/val/test " << t.trans.train_mse << " / " << t.trans.val_mse << " / "
     << t.trans.test_mse << ", rotational " << t.rot.train_mse << " / " << t.rot.val_mse << " / "
     << t.rot.test_mse;
  out.summary = os.str();
  return out;
}

StageOutcome RunPlan(const RunConfig& cfg, const fs::path& model_dir, const fs::path& desired_csv,
                     const fs::path& out_dir) {
  cfg.Validate();
  const LoadedTrajectory desired = ReadTrajectoryCsv(desired_csv);
  DynamicsModel model = GroundTruthModel{cfg.plant};
  std::string name = "ground_truth";
  if (!model_dir.empty()) {
    const fs::path dir = ResolveModelDir(model_dir);
    model = LearnedModel{LoadModel(dir / kTransModel), LoadModel(dir / kRotModel)};
    name = "learned";
  }
  const PlanOutputs p = PlanAndWrite(cfg, model, desired.traj, out_dir, name);
  WriteManifest(out_dir, cfg, {"plan"});
  StageOutcome out;
  out.status = p.result.converged ? StageStatus::kOk : StageStatus::kNotConverged;
  std::ostringstream os;
  os << "plan: " << (p.result.converged ? "converged" : "not converged") << ", objective "
     << p.result.objective << ", max violation " << p.result.max_violation << ", iterations "
     << p.result.iterations;
  out.summary = os.str();
  return out;
}

StageOutcome RunFly(const RunConfig& cfg, const fs::path& trajectory_csv, const std::string& mode,
                    const fs::path& out_dir) {
  cfg.Validate();
  const FlightMode fm = ParseFlightMode(mode);
  const LoadedTrajectory traj = ReadTrajectoryCsv(trajectory_csv);
  if (std::abs(traj.traj.dt - kOuterDt) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, trajectory_csv.string() + ": time step must be 0.01 s");
  }
  Reference ref;
  if (fm == FlightMode::kNnModel) {
    if (!traj.inputs) {
      throw Error(ErrorCode::kInvalidArgument,
                  trajectory_csv.string() + ": nn_model flight needs u1..u4 columns (a plan)");
    }
    ref = PlannedReference(traj.traj.states, *traj.inputs, kOuterDt, cfg.pd);
  } else {
    ref = ModelFreeReference(traj.traj.states, kOuterDt, cfg.plant, cfg.pd);
  }
  EnsureDir(out_dir);
  const FlightOutputs f =
      FlyAndWrite(MakeFlightConfig(cfg), ref, fm, traj.traj.states, kOuterDt, out_dir, "flight");
  WriteManifest(out_dir, cfg, {"fly"});
  StageOutcome out;
  out.status = f.log.crashed ? StageStatus::kCrash : StageStatus::kOk;
  std::ostringstream os;
  os << "fly (" << mode << "): rms position error " << f.error.rms_position << " m"
     << (f.log.crashed ? ", crashed: " + f.log.crash_reason : "");
  out.summary = os.str();
  return out;
}

StageOutcome RunEval(const fs::path& log_csv, const fs::path& desired_csv, const fs::path& out_dir) {
  const FlightLog log = ReadFlightLogCsv(log_csv);
  const LoadedTrajectory desired = ReadTrajectoryCsv(desired_csv);
  const ErrorReport rep = TrackingError(LogStates(log), log.dt, desired.traj.states, desired.traj.dt);
  EnsureDir(out_dir);
  WriteErrorOutputs(out_dir, "eval", rep, log.dt, nullptr);
  StageOutcome out;
  std::ostringstream os;
  os << "eval: rms position error " << rep.rms_position << " m, max " << rep.max_position << " m";
  out.summary = os.str();
  return out;
}

StageOutcome RunExperiment(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.Validate();
  EnsureDir(out_dir);
  const std::vector<ManeuverSpec> suite = cfg.Suite();
  if (suite.empty()) throw Error(ErrorCode::kConfigError, "no maneuvers");

  const StageOutcome collected =
      RunStage("collect", [&] { return RunCollect(cfg, out_dir / "collect"); });
  const TrainOutputs trained = RunStage("train", [&] {
    const std::vector<FlightLog> logs = ReadLogs(out_dir / "collect");
    EnsureDir(out_dir / "train");
    return TrainAndWrite(cfg, logs, out_dir / "train", -1);
  });

  const DesiredTrajectory desired = TaskTrajectory(cfg);
  WriteTrajectoryCsv(out_dir / "desired.csv", desired);
  const LearnedModel learned{trained.trans.net, trained.rot.net};
  const PlanOutputs nn_plan =
      RunStage("plan", [&] { return PlanAndWrite(cfg, learned, desired, out_dir / "plan", "learned"); });

  const FlightConfig fc = RunStage("fly", [&] { return MakeFlightConfig(cfg); });
  const fs::path flights = out_dir / "flights";
  EnsureDir(flights);
  const FlightOutputs model_free = RunStage("fly", [&] {
    return FlyAndWrite(fc, ModelFreeReference(desired.states, desired.dt, cfg.plant, cfg.pd),
                       FlightMode::kModelFree, desired.states, desired.dt, flights, "model_free");
  });
  const FlightOutputs nn_model = RunStage("fly", [&] {
    return FlyAndWrite(fc,
                       PlannedReference(ToStates(nn_plan.result.ref_states),
                                        ToInputs(nn_plan.result.ref_inputs), desired.dt, cfg.pd),
                       FlightMode::kNnModel, desired.states, desired.dt, flights, "nn_model");
  });

  std::optional<PlanOutputs> gt_plan;
  std::optional<FlightOutputs> gt_flight;
  if (cfg.ground_truth_ablation) {
    gt_plan = RunStage("plan", [&] {
      return PlanAndWrite(cfg, GroundTruthModel{cfg.plant}, desired, out_dir / "plan_ground_truth",
                          "ground_truth");
    });
    gt_flight = RunStage("fly", [&] {
      return FlyAndWrite(fc,
                         PlannedReference(ToStates(gt_plan->result.ref_states),
                                          ToInputs(gt_plan->result.ref_inputs), desired.dt, cfg.pd),
                         FlightMode::kNnModel, desired.states, desired.dt, flights, "ground_truth_plan");
    });
  }

  CsvTable cmp;
  cmp.header = {"run", "rms_position", "max_position", "rms_x", "rms_y", "rms_z", "rms_psi", "crashed"};
  auto add = [&](double id, const FlightOutputs& f) {
    cmp.rows.push_back({id, f.error.rms_position, f.error.max_position, f.error.rms[0], f.error.rms[1],
                        f.error.rms[2], f.error.rms[5], f.log.crashed ? 1.0 : 0.0});
  };
  add(0, model_free);
  add(1, nn_model);
  if (gt_flight) add(2, *gt_flight);
  WriteCsv(out_dir / "comparison.csv", cmp);

  const double ratio = nn_model.error.rms_position / model_free.error.rms_position;
  KeyValues kv = {{"model_free_rms_position", Fmt(model_free.error.rms_position)},
                  {"nn_model_rms_position", Fmt(nn_model.error.rms_position)},
                  {"nn_to_model_free_ratio", Fmt(ratio)},
                  {"model_free_crashed", model_free.log.crashed ? "true" : "false"},
                  {"nn_model_crashed", nn_model.log.crashed ? "true" : "false"},
                  {"plan_converged", nn_plan.result.converged ? "true" : "false"},
                  {"plan_objective", Fmt(nn_plan.result.objective)},
                  {"plan_max_violation", Fmt(nn_plan.result.max_violation)},
                  {"plan_iterations", std::to_string(nn_plan.result.iterations)},
                  {"translational_train_mse", Fmt(trained.trans.train_mse)},
                  {"translational_test_mse", Fmt(trained.trans.test_mse)},
                  {"rotational_train_mse", Fmt(trained.rot.train_mse)},
                  {"rotational_test_mse", Fmt(trained.rot.test_mse)}};
  if (gt_flight) {
    kv.push_back({"ground_truth_plan_converged", gt_plan->result.converged ? "true" : "false"});
    kv.push_back({"ground_truth_plan_rms_position", Fmt(gt_flight->error.rms_position)});
  }
  WriteKeyValues(out_dir / "report.txt", kv);

  PlotSpec path;
  path.title = "Sinusoid-yaw task, horizontal path";
  path.x_label = "y [m]";
  path.y_label = "x [m]";
  path.equal_axes = true;
  path.series = {PathSeries("desired", desired.states, "#000000", true),
                 PathSeries("model-free", LogStates(model_free.log), "#d62728"),
                 PathSeries("NN model", LogStates(nn_model.log), "#1f77b4")};
  if (gt_flight) path.series.push_back(PathSeries("true-model plan", LogStates(gt_flight->log), "#2ca02c"));
  WriteSvg(out_dir / "trajectory_xy.svg", path);

  PlotSpec err;
  err.title = "Absolute position tracking error";
  err.x_label = "t [s]";
  err.y_label = "|p - p_d| [m]";
  err.series = {ErrorSeries("model-free", model_free.error, desired.dt, "#d62728"),
                ErrorSeries("NN model", nn_model.error, desired.dt, "#1f77b4")};
  if (gt_flight) err.series.push_back(ErrorSeries("true-model plan", gt_flight->error, desired.dt, "#2ca02c"));
  WriteSvg(out_dir / "tracking_error.svg", err);

  std::vector<std::string> stages = {"collect", "train", "plan", "fly", "eval"};
  if (cfg.ground_truth_ablation) stages.push_back("ablation");
  WriteManifest(out_dir, cfg, stages);

  StageOutcome out;
  const bool crashed = model_free.log.crashed || nn_model.log.crashed || collected.status == StageStatus::kCrash;
  out.status = crashed ? StageStatus::kCrash : StageStatus::kOk;
  std::ostringstream os;
  os << "experiment: model_free rms " << model_free.error.rms_position << " m, nn_model rms "
     << nn_model.error.rms_position << " m (ratio " << ratio << "), plan "
     << (nn_plan.result.converged ? "converged" : "not converged");
  out.summary = os.str();
  return out;
}

}  // namespace nnquad
