#include "nnquad/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nnquad/csv.hpp"
#include "nnquad/errors.hpp"

namespace nnquad {

std::vector<Eigen::Index> Dataset::Indices(Split which) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (split[static_cast<size_t>(i)] == which) idx.push_back(i);
  }
  return idx;
}

Eigen::MatrixXd Dataset::NormalizedTargets() const {
  return (targets.colwise() - out_mean).array().colwise() / out_std.array();
}

void Dataset::FitNormalization() {
  const auto train = Indices(Split::kTrain);
  if (train.empty()) throw Error(ErrorCode::kDegenerateData, "training split is empty");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : train) mean += targets.col(i);
  mean /= static_cast<double>(train.size());
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  for (auto i : train) var += (targets.col(i) - mean).cwiseAbs2();
  var /= static_cast<double>(train.size());
  for (int c = 0; c < 3; ++c) {
    if (!(var(c) > 0.0) || !std::isfinite(var(c))) {
      throw Error(ErrorCode::kDegenerateData,
                  std::string(FeatureKindName(kind)) + " target component " + std::to_string(c) +
                      " has zero variance on the training split");
    }
  }
  out_mean = mean;
  out_std = var.cwiseSqrt();
}

SplitSizes ComputeSplitSizes(Eigen::Index total, double train_frac, double val_frac) {
  if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "split fractions must be non-negative and sum to <= 1");
  }
  SplitSizes s;
  s.train = static_cast<Eigen::Index>(std::floor(train_frac * static_cast<double>(total) + 1e-9));
  s.val = static_cast<Eigen::Index>(std::floor(val_frac * static_cast<double>(total) + 1e-9));
  s.test = total - s.train - s.val;
  return s;
}

std::vector<Split> AssignSplits(Eigen::Index total, double train_frac, double val_frac,
                                std::uint64_t seed) {
  const SplitSizes sizes = ComputeSplitSizes(total, train_frac, val_frac);
  std::vector<Eigen::Index> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> split(static_cast<size_t>(total), Split::kTest);
  for (Eigen::Index k = 0; k < total; ++k) {
    Split s = k < sizes.train ? Split::kTrain
              : k < sizes.train + sizes.val ? Split::kVal
                                            : Split::kTest;
    split[static_cast<size_t>(order[static_cast<size_t>(k)])] = s;
  }
  return split;
}

void TrainConfig::Validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::kConfigError, what); };
  if (passes < 0) fail("passes must be >= 0");
  if (hidden_units < 1) fail("hidden_units must be >= 1");
  if (l2_reg < 0.0) fail("l2_reg must be >= 0");
  if (!(init_std > 0.0)) fail("init_std must be positive");
  if (!(rprop.eta_minus > 0.0 && rprop.eta_minus < 1.0 && rprop.eta_plus > 1.0)) {
    fail("rprop needs 0 < eta_minus < 1 < eta_plus");
  }
  if (!(rprop.delta0 > 0.0 && rprop.delta_min > 0.0 && rprop.delta_max >= rprop.delta_min)) {
    fail("rprop step bounds must be positive");
  }
}

namespace {

constexpr Eigen::Index kChunk = 4096;

Eigen::MatrixXd Gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

struct Params {
  Eigen::MatrixXd W;
  Eigen::VectorXd Bh;
  Eigen::MatrixXd w;
  Eigen::Vector3d b;
};

// Flattened view helpers so Rprop can treat all parameters uniformly.
Eigen::Index ParamCount(const Params& p) { return p.W.size() + p.Bh.size() + p.w.size() + 3; }

void Flatten(const Params& p, Eigen::VectorXd& out) {
  out.resize(ParamCount(p));
  Eigen::Index o = 0;
  out.segment(o, p.W.size()) = p.W.reshaped();
  o += p.W.size();
  out.segment(o, p.Bh.size()) = p.Bh;
  o += p.Bh.size();
  out.segment(o, p.w.size()) = p.w.reshaped();
  o += p.w.size();
  out.segment<3>(o) = p.b;
}

void Unflatten(const Eigen::VectorXd& in, Params& p) {
  Eigen::Index o = 0;
  p.W.reshaped() = in.segment(o, p.W.size());
  o += p.W.size();
  p.Bh = in.segment(o, p.Bh.size());
  o += p.Bh.size();
  p.w.reshaped() = in.segment(o, p.w.size());
  o += p.w.size();
  p.b = in.segment<3>(o);
}

// Sum of squared normalized errors over all columns.
double SumSquaredError(const Params& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  double sse = 0.0;
  for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.cols() - start);
    Eigen::MatrixXd h = ((p.W.transpose() * x.middleCols(start, n)).colwise() + p.Bh).cwiseMax(0.0);
    Eigen::MatrixXd pred = (p.w.transpose() * h).colwise() + p.b;
    sse += (pred - y.middleCols(start, n)).squaredNorm();
  }
  return sse;
}

// Returns the regularized loss and fills the flattened gradient.
double LossAndGradient(const Params& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       double l2, Params& grad, double& mse) {
  const double t = static_cast<double>(x.cols());
  grad.W.setZero(p.W.rows(), p.W.cols());
  grad.Bh.setZero(p.Bh.size());
  grad.w.setZero(p.w.rows(), p.w.cols());
  grad.b.setZero();
  double sse = 0.0;
  const double scale = 2.0 / (3.0 * t);
  for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.cols() - start);
    const auto xs = x.middleCols(start, n);
    Eigen::MatrixXd pre = (p.W.transpose() * xs).colwise() + p.Bh;
    Eigen::MatrixXd h = pre.cwiseMax(0.0);
    Eigen::MatrixXd err = ((p.w.transpose() * h).colwise() + p.b) - y.middleCols(start, n);
    sse += err.squaredNorm();
    err *= scale;
    grad.w.noalias() += h * err.transpose();
    grad.b += err.rowwise().sum();
    Eigen::MatrixXd dh = (p.w * err).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad.W.noalias() += xs * dh.transpose();
    grad.Bh += dh.rowwise().sum();
  }
  grad.W += (2.0 * l2 / t) * p.W;
  grad.w += (2.0 * l2 / t) * p.w;
  mse = sse / (3.0 * t);
  return mse + l2 * (p.W.squaredNorm() + p.w.squaredNorm()) / t;
}

ReluNet ToNet(const Params& p, const Dataset& data, const Eigen::VectorXd& in_mean,
              const Eigen::VectorXd& in_std) {
  ReluNet net;
  net.kind = data.kind;
  net.W = p.W;
  net.hidden_bias = p.Bh;
  net.w = p.w;
  net.b = p.b;
  net.in_mean = in_mean;
  net.in_std = in_std;
  net.out_mean = data.out_mean;
  net.out_std = data.out_std;
  return net;
}

}  // namespace

double NormalizedMse(const ReluNet& net, const Dataset& data, Split which) {
  const auto idx = data.Indices(which);
  if (idx.empty()) return 0.0;
  Eigen::MatrixXd x = Gather(data.features, idx);
  x = (x.colwise() - net.in_mean).array().colwise() / net.in_std.array();
  Eigen::MatrixXd y = Gather(data.targets, idx);
  y = (y.colwise() - net.out_mean).array().colwise() / net.out_std.array();
  Params p{net.W, net.hidden_bias, net.w, net.b};
  return SumSquaredError(p, x, y) / (3.0 * static_cast<double>(idx.size()));
}

void FitInputScaler(const Dataset& data, Eigen::VectorXd& mean, Eigen::VectorXd& stddev) {
  const auto idx = data.Indices(Split::kTrain);
  const Eigen::Index dim = data.features.rows();
  mean = Eigen::VectorXd::Zero(dim);
  stddev = Eigen::VectorXd::Ones(dim);
  if (idx.empty()) return;
  for (auto i : idx) mean += data.features.col(i);
  mean /= static_cast<double>(idx.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (auto i : idx) var += (data.features.col(i) - mean).cwiseAbs2();
  var /= static_cast<double>(idx.size());
  for (Eigen::Index r = 0; r < dim; ++r) {
    stddev(r) = var(r) > 1e-24 ? std::sqrt(var(r)) : 1.0;
  }
}

TrainResult Train(const Dataset& data, const TrainConfig& cfg) {
  cfg.Validate();
  if (data.features.rows() != FeatureDim(data.kind) || data.targets.rows() != 3 ||
      data.targets.cols() != data.size() || static_cast<Eigen::Index>(data.split.size()) != data.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset arrays are inconsistent");
  }
  Dataset fitted = data;
  fitted.FitNormalization();

  Eigen::VectorXd in_mean, in_std;
  FitInputScaler(fitted, in_mean, in_std);
  auto prepare = [&](Split which, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    const auto idx = fitted.Indices(which);
    x = Gather(fitted.features, idx);
    x = (x.colwise() - in_mean).array().colwise() / in_std.array();
    y = Gather(fitted.targets, idx);
    y = (y.colwise() - fitted.out_mean).array().colwise() / fitted.out_std.array();
  };
  Eigen::MatrixXd x_train, y_train, x_val, y_val;
  prepare(Split::kTrain, x_train, y_train);
  prepare(Split::kVal, x_val, y_val);
  const bool has_val = x_val.cols() > 0;

  const int dim = FeatureDim(data.kind);
  const int n = cfg.hidden_units;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  Params p{Eigen::MatrixXd(dim, n), Eigen::VectorXd(n), Eigen::MatrixXd(n, 3), Eigen::Vector3d()};
  for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < p.Bh.size(); ++i) p.Bh(i) = normal(rng);
  for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w.data()[i] = normal(rng);
  for (int i = 0; i < 3; ++i) p.b(i) = normal(rng);

  const Eigen::Index count = ParamCount(p);
  Eigen::VectorXd theta, g, g_prev = Eigen::VectorXd::Zero(count);
  Eigen::VectorXd step = Eigen::VectorXd::Constant(count, cfg.rprop.delta0);
  Params grad = p;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  Params best = p;
  auto val_mse = [&](const Params& q, double train_mse) {
    return has_val ? SumSquaredError(q, x_val, y_val) / (3.0 * static_cast<double>(x_val.cols()))
                   : train_mse;
  };

  for (int epoch = 0; epoch <= cfg.passes; ++epoch) {
    double mse = 0.0;
    const double loss = LossAndGradient(p, x_train, y_train, cfg.l2_reg, grad, mse);
    const double vmse = val_mse(p, mse);
    result.history.push_back({epoch, loss, mse, vmse});
    if (vmse < best_val) {
      best_val = vmse;
      best = p;
      result.best_epoch = epoch;
    }
    if (epoch == cfg.passes) break;

    // iRprop-: shrink and forget the gradient on a sign change.
    Flatten(p, theta);
    Flatten(grad, g);
    for (Eigen::Index i = 0; i < count; ++i) {
      const double s = g(i) * g_prev(i);
      if (s > 0.0) {
        step(i) = std::min(step(i) * cfg.rprop.eta_plus, cfg.rprop.delta_max);
      } else if (s < 0.0) {
        step(i) = std::max(step(i) * cfg.rprop.eta_minus, cfg.rprop.delta_min);
        g(i) = 0.0;
      }
      if (g(i) > 0.0) {
        theta(i) -= step(i);
      } else if (g(i) < 0.0) {
        theta(i) += step(i);
      }
    }
    g_prev = g;
    Unflatten(theta, p);
  }

  result.net = ToNet(best, fitted, in_mean, in_std);
  result.train_mse = NormalizedMse(result.net, fitted, Split::kTrain);
  result.val_mse = NormalizedMse(result.net, fitted, Split::kVal);
  result.test_mse = NormalizedMse(result.net, fitted, Split::kTest);
  return result;
}

void SaveDatasetCsv(const Dataset& data, const std::filesystem::path& path) {
  CsvTable table;
  table.header = FeatureNames(data.kind);
  table.header.insert(table.header.end(), {"target_x", "target_y", "target_z", "split"});
  table.rows.reserve(static_cast<size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::vector<double> row(data.features.col(i).data(),
                            data.features.col(i).data() + data.features.rows());
    for (int c = 0; c < 3; ++c) row.push_back(data.targets(c, i));
    row.push_back(static_cast<double>(data.split[static_cast<size_t>(i)]));
    table.rows.push_back(std::move(row));
  }
  WriteCsv(path, table);
}

Dataset LoadDatasetCsv(const std::filesystem::path& path) {
  CsvTable table = ReadCsv(path);
  Dataset data;
  const auto trans = FeatureNames(FeatureKind::kTranslational);
  const auto rot = FeatureNames(FeatureKind::kRotational);
  auto starts_with = [&](const std::vector<std::string>& names) {
    return table.header.size() == names.size() + 4 &&
           std::equal(names.begin(), names.end(), table.header.begin());
  };
  if (starts_with(trans)) {
    data.kind = FeatureKind::kTranslational;
  } else if (starts_with(rot)) {
    data.kind = FeatureKind::kRotational;
  } else {
    throw Error(ErrorCode::kIoError, path.string() + ": header does not match a feature layout");
  }
  const int dim = FeatureDim(data.kind);
  const auto t = static_cast<Eigen::Index>(table.rows.size());
  data.features.resize(dim, t);
  data.targets.resize(3, t);
  data.split.resize(static_cast<size_t>(t));
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    for (int r = 0; r < dim; ++r) data.features(r, i) = row[static_cast<size_t>(r)];
    for (int c = 0; c < 3; ++c) data.targets(c, i) = row[static_cast<size_t>(dim + c)];
    const double s = row[static_cast<size_t>(dim + 3)];
    if (s != 0.0 && s != 1.0 && s != 2.0) {
      throw Error(ErrorCode::kIoError, path.string() + ": bad split value in row " + std::to_string(i + 2));
    }
    data.split[static_cast<size_t>(i)] = static_cast<Split>(static_cast<int>(s));
  }
  return data;
}

}  // namespace nnquad
