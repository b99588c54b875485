#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "nnquad/errors.hpp"
#include "nnquad/relu_net.hpp"

using namespace nnquad;

namespace {

ReluNet RandomNet(std::mt19937& rng, FeatureKind kind, int hidden) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  ReluNet net = ReluNet::Zeros(kind, hidden);
  for (int i = 0; i < net.W.size(); ++i) net.W.data()[i] = n(rng);
  for (int i = 0; i < net.hidden_bias.size(); ++i) net.hidden_bias(i) = n(rng);
  for (int i = 0; i < net.w.size(); ++i) net.w.data()[i] = n(rng);
  for (int i = 0; i < 3; ++i) {
    net.b(i) = n(rng);
    net.out_mean(i) = n(rng);
    net.out_std(i) = pos(rng);
  }
  for (int i = 0; i < net.input_dim(); ++i) {
    net.in_mean(i) = 0.1 * n(rng);
    net.in_std(i) = pos(rng);
  }
  return net;
}

Eigen::VectorXd RandomInput(std::mt19937& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = n(rng);
  return x;
}

double MinAbsPreactivation(const ReluNet& net, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd x = (beta - net.in_mean).cwiseQuotient(net.in_std);
  return (net.W.transpose() * x + net.hidden_bias).cwiseAbs().minCoeff();
}

}  // namespace

TEST(Featurize, HoverTranslational) {
  PhysicalParams p;
  const Eigen::VectorXd f = Featurize(State{}, p.HoverInput(), FeatureKind::kTranslational);
  ASSERT_EQ(f.size(), 13);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(13);
  expected.segment<3>(9).setOnes();
  expected(12) = p.HoverThrust();
  EXPECT_EQ(f, expected);
}

TEST(Featurize, YawPiRotational) {
  State s;
  s.zeta = Vec3(0, 0, std::numbers::pi);
  const Eigen::VectorXd f = Featurize(s, RotorInput{}, FeatureKind::kRotational);
  ASSERT_EQ(f.size(), 15);
  EXPECT_LT(f.segment<3>(6).norm(), 1e-15);
  EXPECT_LT((f.segment<3>(9) - Eigen::Vector3d(1, 1, -1)).norm(), 1e-15);
}

TEST(Featurize, ZeroAndTwoPiAgree) {
  State a, b;
  b.zeta = Vec3(0, 0, 2 * std::numbers::pi - 1e-15);
  for (auto kind : {FeatureKind::kTranslational, FeatureKind::kRotational}) {
    EXPECT_LT((Featurize(a, RotorInput{}, kind) - Featurize(b, RotorInput{}, kind)).cwiseAbs().maxCoeff(),
              1e-14);
  }
}

TEST(Featurize, NoPositionFeature) {
  State a, b;
  b.p = Vec3(3, -2, 1);
  EXPECT_EQ(Featurize(a, RotorInput{}, FeatureKind::kRotational),
            Featurize(b, RotorInput{}, FeatureKind::kRotational));
}

TEST(Featurize, JacobianMatchesFiniteDifferences) {
  State s;
  s.v = Vec3(0.2, -0.1, 0.3);
  s.zeta = Vec3(0.2, -0.3, 1.2);
  s.omega = Vec3(0.5, 0.1, -0.2);
  const RotorInput u{0.3, Vec3(1e-3, -2e-3, 5e-4)};
  for (auto kind : {FeatureKind::kTranslational, FeatureKind::kRotational}) {
    const FeatureJacobian j = FeaturizeJacobian(s, kind);
    for (int c = 0; c < kStateDim; ++c) {
      StateVec xp = s.ToVector(), xm = xp;
      xp(c) += 1e-6;
      xm(c) -= 1e-6;
      const Eigen::VectorXd fd = (Featurize(State::FromVector(xp), u, kind) -
                                  Featurize(State::FromVector(xm), u, kind)) / 2e-6;
      EXPECT_LT((fd - j.d_state.col(c)).cwiseAbs().maxCoeff(), 1e-8);
    }
    for (int c = 0; c < kInputDim; ++c) {
      InputVec up = u.ToVector(), um = up;
      up(c) += 1e-6;
      um(c) -= 1e-6;
      const Eigen::VectorXd fd = (Featurize(s, RotorInput::FromVector(up), kind) -
                                  Featurize(s, RotorInput::FromVector(um), kind)) / 2e-6;
      EXPECT_LT((fd - j.d_input.col(c)).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Forward, ZeroWeightsGiveBias) {
  ReluNet net = ReluNet::Zeros(FeatureKind::kTranslational, 5);
  net.b = Vec3(1, 2, 3);
  const NetOutput out = Forward(net, Eigen::VectorXd::Random(13));
  EXPECT_EQ(out.normalized, Vec3(1, 2, 3));
  EXPECT_EQ(out.physical, Vec3(1, 2, 3));
}

TEST(Forward, SingleHingeUnit) {
  ReluNet net = ReluNet::Zeros(FeatureKind::kTranslational, 1);
  net.W(0, 0) = 1.0;
  net.hidden_bias(0) = -1.0;
  net.w(0, 0) = 1.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(13);
  beta(0) = 0.5;
  EXPECT_EQ(Forward(net, beta).normalized, Vec3(0, 0, 0));
  beta(0) = 2.0;
  EXPECT_EQ(Forward(net, beta).normalized, Vec3(1, 0, 0));
}

TEST(Forward, MatchesExplicitArithmetic) {
  std::mt19937 rng(3);
  const ReluNet net = RandomNet(rng, FeatureKind::kRotational, 7);
  const Eigen::VectorXd beta = RandomInput(rng, 15);
  Eigen::Vector3d y = net.b;
  for (int j = 0; j < 7; ++j) {
    double a = net.hidden_bias(j);
    for (int i = 0; i < 15; ++i) a += net.W(i, j) * (beta(i) - net.in_mean(i)) / net.in_std(i);
    if (a > 0) y += a * net.w.row(j).transpose();
  }
  const NetOutput out = Forward(net, beta);
  EXPECT_LT((out.normalized - y).norm(), 1e-12);
  EXPECT_LT((out.physical - (net.out_mean + net.out_std.cwiseProduct(y))).norm(), 1e-12);
}

TEST(Forward, DimensionMismatchThrows) {
  const ReluNet net = ReluNet::Zeros(FeatureKind::kTranslational, 3);
  try {
    Forward(net, Eigen::VectorXd::Zero(15));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Forward, AffineWithinActivationRegion) {
  std::mt19937 rng(11);
  const ReluNet net = RandomNet(rng, FeatureKind::kTranslational, 20);
  const Eigen::VectorXd a = RandomInput(rng, 13);
  const Eigen::VectorXd d = 1e-7 * RandomInput(rng, 13);
  ASSERT_GT(MinAbsPreactivation(net, a), 1e-4);
  const Vec3 y0 = Forward(net, a).physical, y1 = Forward(net, a + d).physical,
             y2 = Forward(net, a + 2 * d).physical;
  EXPECT_LT((y2 - 2 * y1 + y0).norm(), 1e-12);
}

TEST(Jacobian, AllInactiveIsZero) {
  ReluNet net = ReluNet::Zeros(FeatureKind::kTranslational, 4);
  net.W.setOnes();
  net.hidden_bias.setConstant(-100.0);
  net.w.setOnes();
  EXPECT_EQ(Jacobian(net, Eigen::VectorXd::Zero(13)), Eigen::MatrixXd::Zero(3, 13));
}

TEST(Jacobian, AllActiveIsLinearMap) {
  std::mt19937 rng(5);
  ReluNet net = RandomNet(rng, FeatureKind::kTranslational, 6);
  net.in_mean.setZero();
  net.in_std.setOnes();
  net.hidden_bias.setConstant(1e3);
  const Eigen::MatrixXd expected = net.out_std.asDiagonal() * net.w.transpose() * net.W.transpose();
  EXPECT_LT((Jacobian(net, RandomInput(rng, 13)) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jacobian, MatchesCentralDifferencesOffKinks) {
  std::mt19937 rng(2024);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    const FeatureKind kind = checked % 2 ? FeatureKind::kRotational : FeatureKind::kTranslational;
    const ReluNet net = RandomNet(rng, kind, 10);
    const Eigen::VectorXd beta = RandomInput(rng, net.input_dim());
    if (MinAbsPreactivation(net, beta) < 1e-3) continue;
    const Eigen::MatrixXd j = Jacobian(net, beta);
    Eigen::MatrixXd fd(3, net.input_dim());
    for (int c = 0; c < net.input_dim(); ++c) {
      Eigen::VectorXd bp = beta, bm = beta;
      bp(c) += 1e-6;
      bm(c) -= 1e-6;
      fd.col(c) = (Forward(net, bp).physical - Forward(net, bm).physical) / 2e-6;
    }
    worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() / std::max(1e-12, j.cwiseAbs().maxCoeff()));
    ++checked;
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(ModelFile, RoundTripIsBitExact) {
  std::mt19937 rng(9);
  const ReluNet net = RandomNet(rng, FeatureKind::kRotational, 12);
  const auto path = std::filesystem::temp_directory_path() / "nnquad_roundtrip.model";
  SaveModel(net, path);
  const ReluNet back = LoadModel(path);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd beta = RandomInput(rng, 15);
    ASSERT_EQ(Forward(net, beta).physical, Forward(back, beta).physical);
  }
  std::filesystem::remove(path);
}

TEST(ModelFile, TruncatedFileIsMalformed) {
  std::mt19937 rng(1);
  const std::string text = SerializeModel(RandomNet(rng, FeatureKind::kTranslational, 4));
  try {
    ParseModel(text.substr(0, text.size() / 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedModelFile);
  }
}

TEST(ModelFile, ZeroOutputScaleIsMalformed) {
  std::mt19937 rng(1);
  std::string text = SerializeModel(RandomNet(rng, FeatureKind::kTranslational, 4));
  const std::string tag = "out_std 3\n";
  const auto pos = text.find(tag);
  ASSERT_NE(pos, std::string::npos);
  const auto start = pos + tag.size();
  text.replace(start, text.find('\n', start) - start, "1 0 1");
  try {
    ParseModel(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedModelFile);
    EXPECT_NE(std::string(e.what()).find("out_std"), std::string::npos);
  }
}
