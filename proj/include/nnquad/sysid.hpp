#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "nnquad/relu_net.hpp"

namespace nnquad {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

/// Supervised samples for one network. Features are stored column-wise
/// ([dim x T]) and targets in physical units ([3 x T]); the output scaler is
/// fit on the training split only.
struct Dataset {
  FeatureKind kind = FeatureKind::kTranslational;
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;
  std::vector<Split> split;
  Eigen::Vector3d out_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d out_std = Eigen::Vector3d::Ones();

  Eigen::Index size() const { return features.cols(); }
  std::vector<Eigen::Index> Indices(Split which) const;
  Eigen::MatrixXd NormalizedTargets() const;

  /// Recomputes out_mean/out_std from the training split. Throws
  /// kDegenerateData when the split is empty or a component is constant.
  void FitNormalization();
};

struct SplitSizes {
  Eigen::Index train = 0;
  Eigen::Index val = 0;
  Eigen::Index test = 0;
};

/// floor(train_frac*T), floor(val_frac*T), remainder.
SplitSizes ComputeSplitSizes(Eigen::Index total, double train_frac, double val_frac);

/// Seeded permutation of [0, total) mapped onto the split sizes.
std::vector<Split> AssignSplits(Eigen::Index total, double train_frac, double val_frac,
                                std::uint64_t seed);

struct RpropParams {
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double delta0 = 0.01;
  double delta_min = 1e-9;
  double delta_max = 1.0;
};

struct TrainConfig {
  int passes = 100;
  int hidden_units = 100;
  double l2_reg = 0.1;
  RpropParams rprop;
  std::uint64_t seed = 1;
  double init_std = 0.1;
  // Kept only for provenance: Rprop uses per-weight steps and no momentum.
  double nominal_learning_rate = 0.01;
  double nominal_momentum = 0.95;

  void Validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;       // regularized training objective
  double train_mse = 0.0;  // normalized MSE, mean over samples and outputs
  double val_mse = 0.0;
};

struct TrainResult {
  ReluNet net;
  std::vector<EpochRecord> history;  // entry 0 is the initial weights
  int best_epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_mse = 0.0;
};

/// Normalized MSE of a net on one split (mean over samples and the 3 outputs).
double NormalizedMse(const ReluNet& net, const Dataset& data, Split which);

/// Per-feature mean/std on the training split; constant features get std 1.
void FitInputScaler(const Dataset& data, Eigen::VectorXd& mean, Eigen::VectorXd& stddev);

/// Full-batch iRprop- on mean squared normalized error plus
/// l2_reg * (|W|^2 + |w|^2) / T. Returns the parameters with the lowest
/// validation MSE seen (training split doubles as validation when val is empty).
TrainResult Train(const Dataset& data, const TrainConfig& cfg);

void SaveDatasetCsv(const Dataset& data, const std::filesystem::path& path);
Dataset LoadDatasetCsv(const std::filesystem::path& path);

}  // namespace nnquad
