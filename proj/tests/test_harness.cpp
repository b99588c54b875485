#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "nnquad/errors.hpp"
#include "nnquad/harness.hpp"

using namespace nnquad;

namespace {

CollectConfig DefaultCollect() {
  CollectConfig cc;
  cc.flight.limits = InputLimits::FromParams(cc.flight.params);
  cc.flight.K = DesignLqr(GroundTruthModel{cc.flight.params}, cc.flight.params, cc.flight.pd, LqrWeights{}).K;
  return cc;
}

}  // namespace

TEST(Maneuver, SinusoidXYAnalytic) {
  ManeuverSpec s;
  s.kind = ManeuverKind::kSinusoidXY;
  s.amplitude = 0.5;
  s.frequency = 0.2;
  s.duration = 30.0;
  const DesiredTrajectory t = GenerateManeuver(s, 0.01);
  ASSERT_EQ(t.states.size(), 3001u);
  const double w = 2 * std::numbers::pi * 0.2;
  for (size_t k = 0; k < t.states.size(); k += 97) {
    const double time = 0.01 * static_cast<double>(k);
    EXPECT_NEAR(t.states[k](kPos), 0.5 * std::sin(w * time), 1e-12);
    EXPECT_NEAR(t.states[k](kVel), 0.5 * w * std::cos(w * time), 1e-9);
    EXPECT_EQ(t.states[k](kAtt + 2), 0.0);
  }
}

TEST(Maneuver, YawSpinWrapsAndHoldsPosition) {
  ManeuverSpec s;
  s.kind = ManeuverKind::kYawSpin;
  s.yaw_rate = 0.5;
  s.duration = 20.0;
  const DesiredTrajectory t = GenerateManeuver(s, 0.01);
  for (const auto& x : t.states) {
    EXPECT_EQ(x.head<6>(), (Eigen::Matrix<double, 6, 1>::Zero()));
    EXPECT_GT(x(kAtt + 2), -std::numbers::pi);
    EXPECT_LE(x(kAtt + 2), std::numbers::pi);
  }
  EXPECT_NEAR(t.states.back()(kAtt + 2), WrapAngle(10.0), 1e-12);
}

TEST(Maneuver, ZeroAmplitudeIsHover) {
  ManeuverSpec s;
  s.amplitude = 0.0;
  s.duration = 2.0;
  for (const auto& x : GenerateManeuver(s, 0.01).states) EXPECT_EQ(x, StateVec::Zero());
}

TEST(Maneuver, EnvelopeViolation) {
  ManeuverSpec s;
  s.amplitude = 2.0;
  s.frequency = 0.5;
  try {
    GenerateManeuver(s, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEnvelopeViolation);
  }
  s.amplitude = 0.1;
  s.frequency = 0.9;
  EXPECT_THROW(GenerateManeuver(s, 0.01), Error);
}

TEST(Maneuver, KindNamesRoundTrip) {
  for (auto k : {ManeuverKind::kSinusoidXY, ManeuverKind::kSinusoidXZ, ManeuverKind::kSinusoidYZ,
                 ManeuverKind::kYawSpin, ManeuverKind::kRandomExcitation}) {
    EXPECT_EQ(ParseManeuverKind(ManeuverKindName(k)), k);
  }
  EXPECT_THROW(ParseManeuverKind("loop"), Error);
}

TEST(SinusoidYaw, RampAndCircle) {
  const DesiredTrajectory t = SinusoidYawTrajectory(0.5, 0.2, 20.0, 2 * std::numbers::pi, 0.01);
  ASSERT_EQ(t.states.size(), 2001u);
  EXPECT_NEAR(t.states[500](kPos + 1), 0.5 * (1 - std::cos(2 * std::numbers::pi * 0.2 * 5.0)), 1e-12);
  EXPECT_NEAR(t.states[500](kAtt + 2), std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(t.states[10](kRate + 2), 2 * std::numbers::pi / 20.0, 1e-15);
}

TEST(Suite, DefaultCorpusRowCount) {
  double total = 0.0;
  for (const auto& s : DefaultSuite(2400.0)) total += s.duration;
  EXPECT_NEAR(total / 0.01, 240000.0, 30.0);
}

TEST(Collect, EmptySuiteFails) {
  try {
    Collect({}, DefaultCollect());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no maneuvers"), std::string::npos);
  }
}

TEST(Collect, SmallSuiteAuditAndDeterminism) {
  const CollectConfig cc = DefaultCollect();
  const auto suite = DefaultSuite(60.0);
  const CollectResult a = Collect(suite, cc);
  const CollectResult b = Collect(suite, cc);
  EXPECT_EQ(a.crashed, 0);
  ASSERT_EQ(a.logs.size(), suite.size());
  for (size_t i = 0; i < a.logs.size(); ++i) {
    ASSERT_EQ(a.logs[i].rows.size(), b.logs[i].rows.size());
    for (size_t k = 0; k < a.logs[i].rows.size(); ++k) {
      ASSERT_EQ(a.logs[i].rows[k].state, b.logs[i].rows[k].state);
    }
  }
  const CoverageAudit audit = AuditCoverage(a.logs);
  EXPECT_GT(audit.rows, 5000);
  EXPECT_EQ(audit.violations, 0);
}

TEST(Audit, FlagsCombinedTranslationAndYaw) {
  FlightLog log;
  FlightRow r;
  r.state = StateVec::Zero();
  r.state(kVel) = 0.2;
  r.state(kRate + 2) = 0.3;
  log.rows.push_back(r);
  r.state(kRate + 2) = 0.0;
  log.rows.push_back(r);
  const CoverageAudit a = AuditCoverage({log});
  EXPECT_EQ(a.rows, 2);
  EXPECT_EQ(a.violations, 1);
}

TEST(Datasets, DeAugmentRoundTrip) {
  const CollectConfig cc = DefaultCollect();
  ManeuverSpec s;
  s.kind = ManeuverKind::kRandomExcitation;
  s.seed = 3;
  s.duration = 5.0;
  const CollectResult res = Collect({s}, cc);
  DatasetOptions opts;
  const DatasetPair d = BuildDatasets(res.logs, cc.flight.pd, cc.flight.limits, opts);
  ASSERT_EQ(d.translational.size(), static_cast<Eigen::Index>(res.logs[0].rows.size()));
  // Rows are shuffled only by split labels, not reordered: feature i is row i.
  int checked = 0;
  for (size_t i = 0; i < res.logs[0].rows.size(); ++i) {
    const FlightRow& row = res.logs[0].rows[i];
    if (row.clamped_inner) continue;
    const Eigen::VectorXd f = d.rotational.features.col(static_cast<Eigen::Index>(i));
    ASSERT_LT((f.segment<3>(12) - row.applied.torque).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_EQ(d.translational.features(12, static_cast<Eigen::Index>(i)), row.applied.u1);
    ASSERT_EQ(d.translational.targets.col(static_cast<Eigen::Index>(i)), row.accel.fv);
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(Datasets, NoLogsIsDegenerate) {
  try {
    BuildDatasets({}, PdGains{}, InputLimits{}, DatasetOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateData);
  }
}

TEST(FlightLogCsv, RoundTrip) {
  const CollectConfig cc = DefaultCollect();
  ManeuverSpec s;
  s.duration = 1.0;
  const CollectResult res = Collect({s}, cc);
  const auto path = std::filesystem::temp_directory_path() / "nnquad_log.csv";
  WriteFlightLogCsv(path, res.logs[0]);
  const FlightLog back = ReadFlightLogCsv(path);
  ASSERT_EQ(back.rows.size(), res.logs[0].rows.size());
  for (size_t k = 0; k < back.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].state, res.logs[0].rows[k].state);
    EXPECT_EQ(back.rows[k].aug.ToVector(), res.logs[0].rows[k].aug.ToVector());
  }
  std::filesystem::remove(path);
}
