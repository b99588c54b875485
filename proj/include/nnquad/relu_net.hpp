#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnquad/types.hpp"

namespace nnquad {

/// Which acceleration block a network predicts. The feature layouts are
///   translational: v[3], omega[3], sin(zeta)[3], cos(zeta)[3], u1      (13)
///   rotational:    v[3], omega[3], sin(zeta)[3], cos(zeta)[3], u2..u4  (15)
/// Position never enters either network.
enum class FeatureKind { kTranslational, kRotational };

int FeatureDim(FeatureKind kind);
const char* FeatureKindName(FeatureKind kind);
FeatureKind ParseFeatureKind(const std::string& name);
std::vector<std::string> FeatureNames(FeatureKind kind);

Eigen::VectorXd Featurize(const State& s, const RotorInput& u, FeatureKind kind);

/// d(features)/d(state) [dim x 12] and d(features)/d(input) [dim x 4].
struct FeatureJacobian {
  Eigen::MatrixXd d_state;
  Eigen::MatrixXd d_input;
};
FeatureJacobian FeaturizeJacobian(const State& s, FeatureKind kind);

/// Two-layer ReLU regressor
///   y_n = w^T max(0, W^T x + hidden_bias) + b,   x = (beta - in_mean) / in_std
///   y   = out_mean + out_std * y_n
/// W is [input_dim x N], w is [N x 3].
struct ReluNet {
  FeatureKind kind = FeatureKind::kTranslational;
  Eigen::MatrixXd W;
  Eigen::VectorXd hidden_bias;
  Eigen::MatrixXd w;
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  Eigen::VectorXd in_mean;
  Eigen::VectorXd in_std;
  Eigen::Vector3d out_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d out_std = Eigen::Vector3d::Ones();

  /// Zero-weight net with identity normalization.
  static ReluNet Zeros(FeatureKind kind, int hidden_units);

  int input_dim() const { return static_cast<int>(W.rows()); }
  int hidden_units() const { return static_cast<int>(W.cols()); }

  // Throws kModelContractViolation on inconsistent shapes or non-finite or
  // non-positive scale entries.
  void Validate() const;
};

struct NetOutput {
  Eigen::Vector3d normalized;
  Eigen::Vector3d physical;
};

NetOutput Forward(const ReluNet& net, const Eigen::VectorXd& beta);

/// Exact Jacobian of the physical output with respect to beta [3 x input_dim].
/// A hidden unit with pre-activation exactly zero counts as inactive.
Eigen::MatrixXd Jacobian(const ReluNet& net, const Eigen::VectorXd& beta);

void SaveModel(const ReluNet& net, const std::filesystem::path& path);
ReluNet LoadModel(const std::filesystem::path& path);

/// Text serialization used by SaveModel / LoadModel.
std::string SerializeModel(const ReluNet& net);
ReluNet ParseModel(const std::string& text);

}  // namespace nnquad
