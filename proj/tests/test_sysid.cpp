#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "nnquad/errors.hpp"
#include "nnquad/sysid.hpp"

using namespace nnquad;

namespace {

ReluNet Teacher(std::mt19937& rng, FeatureKind kind, int hidden) {
  std::normal_distribution<double> n(0.0, 1.0);
  ReluNet net = ReluNet::Zeros(kind, hidden);
  for (int i = 0; i < net.W.size(); ++i) net.W.data()[i] = n(rng) / std::sqrt(net.input_dim());
  for (int i = 0; i < net.hidden_bias.size(); ++i) net.hidden_bias(i) = 0.3 * n(rng);
  for (int i = 0; i < net.w.size(); ++i) net.w.data()[i] = n(rng) / std::sqrt(hidden);
  net.out_std = Vec3(2.0, 0.5, 1.0);
  net.out_mean = Vec3(0.1, -0.2, 9.8);
  return net;
}

Dataset TeacherDataset(const ReluNet& teacher, int samples, std::uint64_t seed) {
  std::mt19937 rng(static_cast<unsigned>(seed));
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset d;
  d.kind = teacher.kind;
  d.features.resize(teacher.input_dim(), samples);
  d.targets.resize(3, samples);
  for (int t = 0; t < samples; ++t) {
    for (int r = 0; r < teacher.input_dim(); ++r) d.features(r, t) = n(rng);
    d.targets.col(t) = Forward(teacher, d.features.col(t)).physical;
  }
  d.split = AssignSplits(samples, 0.6, 0.25, seed);
  return d;
}

}  // namespace

TEST(Split, DefaultCorpusSizes) {
  const SplitSizes s = ComputeSplitSizes(240000, 0.6, 0.25);
  EXPECT_EQ(s.train, 144000);
  EXPECT_EQ(s.val, 60000);
  EXPECT_EQ(s.test, 36000);
}

TEST(Split, AssignmentIsSeededPartition) {
  const auto a = AssignSplits(1000, 0.6, 0.25, 42);
  const auto b = AssignSplits(1000, 0.6, 0.25, 42);
  const auto c = AssignSplits(1000, 0.6, 0.25, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  int counts[3] = {0, 0, 0};
  for (Split s : a) ++counts[static_cast<int>(s)];
  EXPECT_EQ(counts[0], 600);
  EXPECT_EQ(counts[1], 250);
  EXPECT_EQ(counts[2], 150);
}

TEST(Split, BadFractionsThrow) {
  EXPECT_THROW(ComputeSplitSizes(10, 0.8, 0.3), Error);
  EXPECT_THROW(ComputeSplitSizes(10, -0.1, 0.3), Error);
}

TEST(Normalization, StatsComeFromTrainingSplitOnly) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(13, 4);
  d.targets.resize(3, 4);
  d.targets << 1, 3, 100, -100,  //
      0, 2, 50, 50,              //
      5, 7, 0, 0;
  d.split = {Split::kTrain, Split::kTrain, Split::kVal, Split::kTest};
  d.FitNormalization();
  EXPECT_EQ(d.out_mean, Vec3(2, 1, 6));
  EXPECT_EQ(d.out_std, Vec3(1, 1, 1));
  const Eigen::MatrixXd z = d.NormalizedTargets();
  EXPECT_EQ(z(0, 0), -1.0);
  EXPECT_EQ(z(0, 1), 1.0);
}

TEST(Normalization, ConstantTargetIsDegenerate) {
  Dataset d;
  d.features = Eigen::MatrixXd::Random(13, 20);
  d.targets = Eigen::MatrixXd::Random(3, 20);
  d.targets.row(1).setConstant(9.81);
  d.split.assign(20, Split::kTrain);
  try {
    d.FitNormalization();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateData);
  }
  TrainConfig cfg;
  cfg.passes = 1;
  EXPECT_THROW(Train(d, cfg), Error);
}

TEST(Normalization, InputScalerHandlesConstantFeatures) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(13, 3);
  d.features.row(0) << 1, 2, 3;
  d.split.assign(3, Split::kTrain);
  Eigen::VectorXd mean, sd;
  FitInputScaler(d, mean, sd);
  EXPECT_NEAR(mean(0), 2.0, 1e-15);
  EXPECT_NEAR(sd(0), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_EQ(sd(5), 1.0);
}

TEST(Train, RecoversKnownNetwork) {
  std::mt19937 rng(17);
  const ReluNet teacher = Teacher(rng, FeatureKind::kTranslational, 20);
  const Dataset d = TeacherDataset(teacher, 6000, 5);
  TrainConfig cfg;
  cfg.passes = 100;
  cfg.hidden_units = 100;
  cfg.seed = 3;
  const TrainResult r = Train(d, cfg);
  EXPECT_LT(r.test_mse, 0.02);
  EXPECT_EQ(r.history.size(), 101u);
  EXPECT_LE(r.val_mse, r.history.front().val_mse);
}

TEST(Train, LossMostlyNonIncreasing) {
  std::mt19937 rng(23);
  const ReluNet teacher = Teacher(rng, FeatureKind::kRotational, 30);
  const Dataset d = TeacherDataset(teacher, 4000, 8);
  TrainConfig cfg;
  cfg.passes = 100;
  const TrainResult r = Train(d, cfg);
  int down = 0;
  for (size_t k = 1; k < r.history.size(); ++k) down += r.history[k].loss <= r.history[k - 1].loss;
  EXPECT_GE(static_cast<double>(down) / static_cast<double>(r.history.size() - 1), 0.95);
}

TEST(Train, DeterministicForSeed) {
  std::mt19937 rng(4);
  const Dataset d = TeacherDataset(Teacher(rng, FeatureKind::kTranslational, 5), 500, 2);
  TrainConfig cfg;
  cfg.passes = 10;
  cfg.hidden_units = 8;
  const TrainResult a = Train(d, cfg), b = Train(d, cfg);
  EXPECT_EQ(a.net.W, b.net.W);
  EXPECT_EQ(a.test_mse, b.test_mse);
}

TEST(Train, ZeroPassesKeepsInitialWeights) {
  std::mt19937 rng(4);
  const Dataset d = TeacherDataset(Teacher(rng, FeatureKind::kTranslational, 5), 200, 2);
  TrainConfig cfg;
  cfg.passes = 0;
  const TrainResult r = Train(d, cfg);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.best_epoch, 0);
}

TEST(Train, InconsistentDatasetThrows) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(15, 10);
  d.targets = Eigen::MatrixXd::Zero(3, 10);
  d.split.assign(10, Split::kTrain);
  try {
    Train(d, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Train, TrainedNetPredictsPhysicalUnits) {
  std::mt19937 rng(31);
  const ReluNet teacher = Teacher(rng, FeatureKind::kTranslational, 10);
  const Dataset d = TeacherDataset(teacher, 3000, 9);
  TrainConfig cfg;
  cfg.passes = 100;
  const TrainResult r = Train(d, cfg);
  // Mean physical error should be a small fraction of the target spread.
  double err = 0.0;
  const auto test = d.Indices(Split::kTest);
  for (auto i : test) {
    err += (Forward(r.net, d.features.col(i)).physical - d.targets.col(i))
               .cwiseQuotient(r.net.out_std)
               .squaredNorm();
  }
  EXPECT_NEAR(err / (3.0 * static_cast<double>(test.size())), r.test_mse, 1e-12);
}

TEST(DatasetCsv, RoundTrip) {
  std::mt19937 rng(6);
  const Dataset d = TeacherDataset(Teacher(rng, FeatureKind::kRotational, 4), 50, 1);
  const auto path = std::filesystem::temp_directory_path() / "nnquad_dataset.csv";
  SaveDatasetCsv(d, path);
  const Dataset back = LoadDatasetCsv(path);
  EXPECT_EQ(back.kind, FeatureKind::kRotational);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.targets, d.targets);
  EXPECT_EQ(back.split, d.split);
  std::filesystem::remove(path);
}
