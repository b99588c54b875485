#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nnquad/config.hpp"

namespace nnquad {

/// Result of a stage that ran to completion (errors are thrown instead).
enum class StageStatus { kOk = 0, kCrash = 2, kNotConverged = 3 };

struct StageOutcome {
  StageStatus status = StageStatus::kOk;
  std::string summary;  // one line for the console
};

inline constexpr const char* kToolVersion = "nnquad 1.0.0";

/// Flies the maneuver suite model-free and writes logs/NNN_<kind>.csv,
/// collect_report.txt and the manifest. kCrash when any flight crashed
/// (partial logs are kept).
StageOutcome RunCollect(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Reads the logs of a collect run, builds both datasets, trains both nets
/// and writes datasets/, models/, train_history.csv and mse_summary.txt.
/// A negative `passes` keeps the configured value.
StageOutcome RunTrain(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, int passes = -1);

/// Plans against the learned models in `model_dir` (a train output directory
/// or its models/ subdirectory), or the ground-truth plant when `model_dir`
/// is empty. Writes plan.csv, plan_history.csv and plan_report.txt.
StageOutcome RunPlan(const RunConfig& cfg, const std::filesystem::path& model_dir,
                     const std::filesystem::path& desired_csv, const std::filesystem::path& out_dir);

/// Flies a trajectory CSV. "nn_model" needs u1..u4 columns (a plan);
/// "model_free" uses the states only. Writes flight_log.csv plus the
/// tracking-error outputs against the file's states.
StageOutcome RunFly(const RunConfig& cfg, const std::filesystem::path& trajectory_csv,
                    const std::string& mode, const std::filesystem::path& out_dir);

/// Tracking error of a flight log CSV against a trajectory CSV.
StageOutcome RunEval(const std::filesystem::path& log_csv, const std::filesystem::path& desired_csv,
                     const std::filesystem::path& out_dir);

/// collect -> train -> plan -> fly (nn_model, model_free and optionally a
/// ground-truth plan) -> comparison report and plots. Plan convergence is
/// reported, not returned as a status.
StageOutcome RunExperiment(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// The sinusoid-yaw task described by the config.
DesiredTrajectory TaskTrajectory(const RunConfig& cfg);

}  // namespace nnquad
