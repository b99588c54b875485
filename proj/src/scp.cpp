#include "nnquad/scp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "nnquad/errors.hpp"

namespace nnquad {

namespace {

Mat3 RotX(double a, bool derivative) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  if (derivative) {
    r << 0, 0, 0, 0, -s, c, 0, -c, -s;
  } else {
    r << 1, 0, 0, 0, c, s, 0, -s, c;
  }
  return r;
}

Mat3 RotY(double a, bool derivative) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  if (derivative) {
    r << -s, 0, -c, 0, 0, 0, c, 0, -s;
  } else {
    r << c, 0, -s, 0, 1, 0, s, 0, c;
  }
  return r;
}

Mat3 RotZ(double a, bool derivative) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  if (derivative) {
    r << -s, c, 0, -c, -s, 0, 0, 0, 0;
  } else {
    r << c, s, 0, -s, c, 0, 0, 0, 1;
  }
  return r;
}

Mat3 Skew(const Vec3& a) {
  Mat3 m;
  m << 0, -a(2), a(1), a(2), 0, -a(0), -a(1), a(0), 0;
  return m;
}

// d(W(zeta) omega)/d(zeta)
Mat3 EulerRateJacobian(const Vec3& zeta, const Vec3& omega) {
  const double sp = std::sin(zeta(0)), cp = std::cos(zeta(0));
  const double st = std::sin(zeta(1)), ct = std::cos(zeta(1));
  const double a = sp * omega(1) + cp * omega(2);
  const double b = cp * omega(1) - sp * omega(2);
  Mat3 j;
  j << b * st / ct, a / (ct * ct), 0,
       -a, 0, 0,
       b / ct, a * st / (ct * ct), 0;
  return j;
}

}  // namespace

StateVec PlanningStep(const DynamicsModel& model, const StateVec& s, const InputVec& u, double dt) {
  StateVec x = s + StateDerivative(model, State::FromVector(s), RotorInput::FromVector(u)) * dt;
  WrapAttitude(x);
  return x;
}

Linearization LinearizeDynamics(const DynamicsModel& model, const StateVec& s, const InputVec& u,
                                double dt) {
  const State st = State::FromVector(s);
  const RotorInput in = RotorInput::FromVector(u);
  Eigen::Matrix<double, kStateDim, kStateDim> jx = Eigen::Matrix<double, kStateDim, kStateDim>::Zero();
  Eigen::Matrix<double, kStateDim, kInputDim> ju = Eigen::Matrix<double, kStateDim, kInputDim>::Zero();
  jx.block<3, 3>(kPos, kVel).setIdentity();
  jx.block<3, 3>(kAtt, kRate) = EulerRateMatrix(st.zeta);
  jx.block<3, 3>(kAtt, kAtt) = EulerRateJacobian(st.zeta, st.omega);

  if (const auto* gt = std::get_if<GroundTruthModel>(&model)) {
    const PhysicalParams& p = gt->params;
    const Vec3 thrust(0.0, 0.0, -in.u1 / p.mass);
    const Mat3 rx = RotX(st.zeta(0), false), ry = RotY(st.zeta(1), false), rz = RotZ(st.zeta(2), false);
    const Mat3 dr[3] = {RotX(st.zeta(0), true) * ry * rz, rx * RotY(st.zeta(1), true) * rz,
                        rx * ry * RotZ(st.zeta(2), true)};
    for (int j = 0; j < 3; ++j) jx.block<3, 1>(kVel, kAtt + j) = dr[j].transpose() * thrust;
    ju.block<3, 1>(kVel, 0) = (rx * ry * rz).transpose() * Vec3(0.0, 0.0, -1.0 / p.mass);
    const Vec3 inv = p.inertia_diag.cwiseInverse();
    const Mat3 gyro = Skew(p.inertia_diag.cwiseProduct(st.omega)) - Skew(st.omega) * p.inertia_diag.asDiagonal();
    jx.block<3, 3>(kRate, kRate) = inv.asDiagonal() * gyro;
    ju.block<3, 3>(kRate, 1) = inv.asDiagonal();
  } else {
    const auto& learned = std::get<LearnedModel>(model);
    const std::pair<const ReluNet*, int> nets[2] = {{&learned.fv_net, kVel}, {&learned.fw_net, kRate}};
    for (const auto& [net, row] : nets) {
      const Eigen::VectorXd beta = Featurize(st, in, net->kind);
      const Eigen::MatrixXd jn = Jacobian(*net, beta);
      const FeatureJacobian fj = FeaturizeJacobian(st, net->kind);
      jx.block(row, 0, 3, kStateDim) += jn * fj.d_state;
      ju.block(row, 0, 3, kInputDim) = jn * fj.d_input;
    }
  }

  Linearization lin;
  lin.A = Eigen::MatrixXd::Identity(kStateDim, kStateDim) + dt * jx;
  lin.B = dt * ju;
  lin.c = PlanningStep(model, s, u, dt);
  return lin;
}

QuadrotorPlanningModel::QuadrotorPlanningModel(DynamicsModel model, const PhysicalParams& params)
    : model_(std::move(model)), params_(params) {
  params_.Validate();
  ValidateModel(model_);
}

Eigen::VectorXd QuadrotorPlanningModel::Step(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const {
  return PlanningStep(model_, s, u, params_.dt);
}

Linearization QuadrotorPlanningModel::Linearize(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const {
  return LinearizeDynamics(model_, s, u, params_.dt);
}

Eigen::VectorXd QuadrotorPlanningModel::Difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return StateDifference(a, b);
}

Eigen::VectorXd QuadrotorPlanningModel::Retract(const Eigen::VectorXd& s, const Eigen::VectorXd& delta) const {
  StateVec x = s + delta;
  WrapAttitude(x);
  return x;
}

Eigen::VectorXd QuadrotorPlanningModel::InputLower() const {
  Eigen::VectorXd lo(kInputDim);
  lo << 0.0, -params_.torque_max, -params_.torque_max, -params_.torque_max;
  return lo;
}

Eigen::VectorXd QuadrotorPlanningModel::InputUpper() const {
  Eigen::VectorXd hi(kInputDim);
  hi << params_.u1_max, params_.torque_max, params_.torque_max, params_.torque_max;
  return hi;
}

Eigen::VectorXd QuadrotorPlanningModel::NominalInput() const {
  return params_.HoverInput().ToVector();
}

Eigen::VectorXd DoubleIntegratorModel::Step(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const {
  Eigen::VectorXd next(2);
  next << s(0) + s(1) * dt_, s(1) + u(0) * dt_;
  return next;
}

Linearization DoubleIntegratorModel::Linearize(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const {
  Linearization lin;
  lin.A.resize(2, 2);
  lin.A << 1.0, dt_, 0.0, 1.0;
  lin.B.resize(2, 1);
  lin.B << 0.0, dt_;
  lin.c = Step(s, u);
  return lin;
}

Eigen::VectorXd DoubleIntegratorModel::InputLower() const {
  return Eigen::VectorXd::Constant(1, -accel_max_);
}

Eigen::VectorXd DoubleIntegratorModel::InputUpper() const {
  return Eigen::VectorXd::Constant(1, accel_max_);
}

Eigen::VectorXd DoubleIntegratorModel::NominalInput() const { return Eigen::VectorXd::Zero(1); }

void ScpConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kConfigError, std::string("scp: ") + what);
  };
  require(feas_tol > 0.0, "feas_tol must be positive");
  require(penalty_init > 0.0, "penalty_init must be positive");
  require(penalty_mult > 1.0, "penalty_mult must exceed 1");
  require(max_penalty_rounds >= 1, "max_penalty_rounds must be >= 1");
  require(trust_state > 0.0 && trust_input > 0.0, "trust radii must be positive");
  require(trust_shrink > 0.0 && trust_shrink < 1.0, "trust_shrink must lie in (0, 1)");
  require(trust_expand > 1.0, "trust_expand must exceed 1");
  require(trust_max_factor >= 1.0, "trust_max_factor must be >= 1");
  require(trust_min_factor > 0.0 && trust_min_factor < 1.0, "trust_min_factor must lie in (0, 1)");
  require(improvement_accept_ratio > 0.0 && improvement_accept_ratio < 1.0,
          "improvement_accept_ratio must lie in (0, 1)");
  require(max_inner_iters >= 1, "max_inner_iters must be >= 1");
  require(stall_tol > 0.0, "stall_tol must be positive");
  require(qp_gap_tol > 0.0 && qp_newton_tol > 0.0, "qp tolerances must be positive");
  require(qp_barrier_mult > 1.0, "qp_barrier_mult must exceed 1");
  require(qp_max_newton >= 1, "qp_max_newton must be >= 1");
  require(projection_state_weight > 0.0 && projection_input_weight > 0.0, "projection weights must be positive");
}

Subproblem BuildSubproblem(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                           const PlanTrajectory& iterate) {
  const size_t n = iterate.inputs.size();
  if (iterate.states.size() != n + 1 || desired.size() != n + 1) {
    throw Error(ErrorCode::kDimensionMismatch, "iterate and desired lengths disagree");
  }
  Subproblem sub;
  sub.lin.reserve(n);
  sub.defects.reserve(n);
  sub.tracking.reserve(n + 1);
  for (size_t k = 0; k < n; ++k) {
    sub.lin.push_back(model.Linearize(iterate.states[k], iterate.inputs[k]));
    sub.defects.push_back(model.Difference(iterate.states[k + 1], sub.lin.back().c));
  }
  for (size_t k = 0; k <= n; ++k) sub.tracking.push_back(model.Difference(iterate.states[k], desired[k]));
  return sub;
}

namespace {

double NormBarrierValue(double c, double rho) {
  const double q = std::hypot(1.0, c * rho);
  return (1.0 + q) - std::log(1.0 + q);
}

// Interior-point solver for the convexified problem. The epigraph variables of
// |y|_2 <= t and |z_i| <= r_i are minimized out of the central-path function
// in closed form, so only input steps v, defect slacks eps and the implied
// state steps x remain; Newton directions come from a Riccati recursion.
template <int NX, int NU>
class BarrierSolver {
 public:
  static constexpr int NW = (NX == Eigen::Dynamic || NU == Eigen::Dynamic) ? Eigen::Dynamic : NX + NU;
  using VX = Eigen::Matrix<double, NX, 1>;
  using VU = Eigen::Matrix<double, NU, 1>;
  using VW = Eigen::Matrix<double, NW, 1>;
  using MXX = Eigen::Matrix<double, NX, NX>;
  using MXU = Eigen::Matrix<double, NX, NU>;
  using MUU = Eigen::Matrix<double, NU, NU>;
  using MWW = Eigen::Matrix<double, NW, NW>;
  using MWX = Eigen::Matrix<double, NW, NX>;

  struct Point {
    std::vector<VU> v;
    std::vector<VX> eps;
    std::vector<VX> x;  // x[0] = 0
  };

  BarrierSolver(const PlanningModel& model, const Subproblem& sub, const PlanTrajectory& iterate,
                double mu, const TrustRegion& trust, const Eigen::VectorXd& scale, bool squared)
      : mu_(mu), squared_(squared), bound_(trust.state) {
    n_ = model.StateDim();
    m_ = model.InputDim();
    h_ = sub.lin.size();
    a_.resize(h_);
    bs_.resize(h_);
    defect_.resize(h_);
    track_.resize(h_ + 1);
    vlo_.resize(h_);
    vhi_.resize(h_);
    fixed_.resize(h_);
    pt_.v.resize(h_);
    pt_.eps.resize(h_);
    const Eigen::VectorXd ulo = model.InputLower(), uhi = model.InputUpper();
    for (size_t k = 0; k < h_; ++k) {
      a_[k] = sub.lin[k].A;
      bs_[k] = sub.lin[k].B * scale.asDiagonal();
      defect_[k] = sub.defects[k];
      vlo_[k] = VU::Zero(m_);
      vhi_[k] = VU::Zero(m_);
      fixed_[k] = VU::Zero(m_);
      pt_.v[k] = VU::Zero(m_);
      for (int i = 0; i < m_; ++i) {
        vlo_[k](i) = std::max(-trust.input, (ulo(i) - iterate.inputs[k](i)) / scale(i));
        vhi_[k](i) = std::min(trust.input, (uhi(i) - iterate.inputs[k](i)) / scale(i));
        const double width = vhi_[k](i) - vlo_[k](i);
        if (width <= 1e-12 * trust.input) {
          fixed_[k](i) = 1.0;
          pt_.v[k](i) = std::clamp(0.0, vlo_[k](i), vhi_[k](i));
        } else {
          pt_.v[k](i) = std::clamp(0.0, vlo_[k](i) + 0.01 * width, vhi_[k](i) - 0.01 * width);
        }
      }
      pt_.eps[k] = -bs_[k] * pt_.v[k];
    }
    for (size_t k = 0; k <= h_; ++k) track_[k] = sub.tracking[k];
    Rollout(pt_);
  }

  // Runs the path-following loop; returns the number of Newton steps.
  int Run(const ScpConfig& cfg) {
    const double nu = Nu();
    double merit = Merit(pt_);
    double tau = std::max(1e-3, nu / (1.0 + merit));
    double phi = Barrier(tau, pt_);
    if (!std::isfinite(phi)) {
      throw Error(ErrorCode::kQpNumericalFailure, "subproblem start point is not interior");
    }
    int newton = 0;
    Point trial_pt;
    while (newton < cfg.qp_max_newton) {
      while (newton < cfg.qp_max_newton) {
        const double dec = Direction(tau);
        ++newton;
        if (!(dec > -1e-9 * (1.0 + std::abs(phi)))) {
          // Late breakdowns keep the last central point; the first one is fatal.
          if (newton > 1) return newton;
          throw Error(ErrorCode::kQpNumericalFailure,
                      failure_.empty() ? "Newton direction is not a descent direction" : failure_);
        }
        if (0.5 * dec <= cfg.qp_newton_tol) break;
        double alpha = StepLimit();
        bool moved = false;
        for (int ls = 0; ls < 50 && alpha > 1e-12; ++ls, alpha *= 0.5) {
          trial_pt = pt_;
          for (size_t k = 0; k < h_; ++k) {
            trial_pt.v[k] += alpha * dir_.v[k];
            trial_pt.eps[k] += alpha * dir_.eps[k];
            trial_pt.x[k + 1] += alpha * dir_.x[k + 1];
          }
          const double trial = Barrier(tau, trial_pt);
          if (std::isfinite(trial) && trial < phi && trial <= phi - 0.01 * alpha * dec) {
            std::swap(pt_, trial_pt);
            phi = trial;
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
      merit = Merit(pt_);
      if (nu / tau <= cfg.qp_gap_tol * (1.0 + std::abs(merit)) || tau > 1e15) break;
      tau *= cfg.qp_barrier_mult;
      phi = Barrier(tau, pt_);
    }
    return newton;
  }

  double Merit() const { return Merit(pt_); }
  const Point& point() const { return pt_; }

 private:
  double Nu() const {
    double nu = 0.0;
    for (const auto& f : fixed_) nu += 2.0 * (static_cast<double>(m_) - f.sum());
    return nu + static_cast<double>(h_) * (4.0 * n_ + (squared_ ? 0.0 : 2.0));
  }

  void Rollout(Point& p) const {
    p.x.assign(h_ + 1, VX::Zero(n_));
    for (size_t k = 0; k < h_; ++k) p.x[k + 1] = a_[k] * p.x[k] + bs_[k] * p.v[k] + p.eps[k];
  }

  double Merit(const Point& p) const {
    double f = 0.0;
    for (size_t k = 0; k <= h_; ++k) {
      const VX y = track_[k] + p.x[k];
      f += squared_ ? y.squaredNorm() : y.norm();
    }
    for (size_t k = 0; k < h_; ++k) f += mu_ * (defect_[k] + p.eps[k]).template lpNorm<1>();
    return f;
  }

  double Barrier(double tau, const Point& p) const {
    double phi = 0.0;
    const double cz = tau * mu_;
    for (size_t k = 0; k < h_; ++k) {
      for (int i = 0; i < m_; ++i) {
        if (fixed_[k](i) != 0.0) continue;
        const double lo = p.v[k](i) - vlo_[k](i), hi = vhi_[k](i) - p.v[k](i);
        if (!(lo > 0.0) || !(hi > 0.0)) return std::numeric_limits<double>::infinity();
        phi -= std::log(lo) + std::log(hi);
      }
      const VX& x = p.x[k + 1];
      for (int i = 0; i < n_; ++i) {
        const double lo = x(i) + bound_, hi = bound_ - x(i);
        if (!(lo > 0.0) || !(hi > 0.0)) return std::numeric_limits<double>::infinity();
        phi -= std::log(lo) + std::log(hi);
      }
      const VX y = track_[k + 1] + x;
      phi += squared_ ? tau * y.squaredNorm() : NormBarrierValue(tau, y.norm());
      const VX z = defect_[k] + p.eps[k];
      for (int i = 0; i < n_; ++i) phi += NormBarrierValue(cz, std::abs(z(i)));
    }
    return phi;
  }

  // Gradient and Hessian of the state terms at x[idx].
  void StateTerms(double tau, size_t idx, MXX& q, VX& g) const {
    const VX& x = pt_.x[idx];
    const VX y = track_[idx] + x;
    if (squared_) {
      q = 2.0 * tau * MXX::Identity(n_, n_);
      g = 2.0 * tau * y;
    } else {
      const double c = std::hypot(1.0, tau * y.norm());
      const double s = tau * tau / (1.0 + c);
      q = s * MXX::Identity(n_, n_) - (std::pow(tau, 4) / (c * (1.0 + c) * (1.0 + c))) * (y * y.transpose());
      g = s * y;
    }
    for (int i = 0; i < n_; ++i) {
      const double lo = x(i) + bound_, hi = bound_ - x(i);
      g(i) += -1.0 / lo + 1.0 / hi;
      q(i, i) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
    }
  }

  // Newton direction into dir_; returns the squared Newton decrement.
  double Direction(double tau) {
    const int nw = m_ + n_;
    gain_.resize(h_);
    feed_.resize(h_);
    grad_u_.resize(h_);
    grad_x_.resize(h_ + 1);
    bsd_.resize(h_);
    const double cz = tau * mu_;

    MXX p, q;
    VX pv, g;
    StateTerms(tau, h_, p, pv);
    grad_x_[h_] = pv;
    for (size_t kk = h_; kk-- > 0;) {
      MXU& b = bsd_[kk];
      b = bs_[kk];
      VW r = VW::Zero(nw), rdiag = VW::Zero(nw);
      for (int i = 0; i < m_; ++i) {
        if (fixed_[kk](i) != 0.0) {
          b.col(i).setZero();
          rdiag(i) = 1.0;
          continue;
        }
        const double lo = pt_.v[kk](i) - vlo_[kk](i), hi = vhi_[kk](i) - pt_.v[kk](i);
        r(i) = -1.0 / lo + 1.0 / hi;
        rdiag(i) = 1.0 / (lo * lo) + 1.0 / (hi * hi);
      }
      const VX z = defect_[kk] + pt_.eps[kk];
      for (int i = 0; i < n_; ++i) {
        const double c = std::hypot(1.0, cz * z(i));
        r(m_ + i) = cz * cz * z(i) / (1.0 + c);
        rdiag(m_ + i) = cz * cz / (c * (1.0 + c));
      }
      grad_u_[kk] = r;

      const MXX& a = a_[kk];
      const MXU pb = p * b;
      const MXX pa = p * a;
      MWW huu = MWW::Zero(nw, nw);
      huu.topLeftCorner(m_, m_) = b.transpose() * pb;
      huu.topRightCorner(m_, n_) = pb.transpose();
      huu.bottomLeftCorner(n_, m_) = pb;
      huu.bottomRightCorner(n_, n_) = p;
      huu.diagonal() += rdiag;
      MWX hux = MWX::Zero(nw, n_);
      hux.topRows(m_) = b.transpose() * pa;
      hux.bottomRows(n_) = pa;
      VW hu = r;
      hu.head(m_) += b.transpose() * pv;
      hu.tail(n_) += pv;
      Eigen::LLT<MWW> llt(huu);
      if (llt.info() != Eigen::Success) {
        failure_ = "Newton block at step " + std::to_string(kk) + " is not positive definite (tau " +
                   std::to_string(tau) + ")";
        return std::numeric_limits<double>::quiet_NaN();
      }
      gain_[kk] = -llt.solve(hux);
      feed_[kk] = -llt.solve(hu);
      if (kk >= 1) {
        StateTerms(tau, kk, q, g);
        grad_x_[kk] = g;
        const MXX pn = q + a.transpose() * pa + hux.transpose() * gain_[kk];
        pv = g + a.transpose() * pv + hux.transpose() * feed_[kk];
        p = 0.5 * (pn + pn.transpose());
      }
    }

    dir_.v.resize(h_);
    dir_.eps.resize(h_);
    dir_.x.assign(h_ + 1, VX::Zero(n_));
    double dec = 0.0;
    for (size_t k = 0; k < h_; ++k) {
      const VW du = gain_[k] * dir_.x[k] + feed_[k];
      if (!du.allFinite()) {
        failure_ = "non-finite Newton step at step " + std::to_string(k);
        return std::numeric_limits<double>::quiet_NaN();
      }
      dir_.v[k] = du.head(m_);
      dir_.eps[k] = du.tail(n_);
      dir_.x[k + 1] = a_[k] * dir_.x[k] + bsd_[k] * dir_.v[k] + dir_.eps[k];
      dec -= grad_u_[k].dot(du) + grad_x_[k + 1].dot(dir_.x[k + 1]);
    }
    return dec;
  }

  // Largest step in (0, 1] that stays strictly inside every box.
  double StepLimit() const {
    double alpha = 1.0;
    auto limit = [&alpha](double x, double dx, double lo, double hi) {
      if (dx > 0.0) alpha = std::min(alpha, 0.99 * (hi - x) / dx);
      if (dx < 0.0) alpha = std::min(alpha, 0.99 * (lo - x) / dx);
    };
    for (size_t k = 0; k < h_; ++k) {
      for (int i = 0; i < m_; ++i) {
        if (fixed_[k](i) == 0.0) limit(pt_.v[k](i), dir_.v[k](i), vlo_[k](i), vhi_[k](i));
      }
      for (int i = 0; i < n_; ++i) limit(pt_.x[k + 1](i), dir_.x[k + 1](i), -bound_, bound_);
    }
    return alpha;
  }

  double mu_;
  bool squared_;
  double bound_;
  int n_ = 0, m_ = 0;
  size_t h_ = 0;
  std::vector<MXX> a_;
  std::vector<MXU> bs_, bsd_;
  std::vector<VX> defect_, track_, grad_x_;
  std::vector<VU> vlo_, vhi_, fixed_;
  std::vector<MWX> gain_;
  std::vector<VW> feed_, grad_u_;
  Point pt_, dir_;
  std::string failure_;
};

template <int NX, int NU>
SubproblemResult RunSolver(const PlanningModel& model, const Subproblem& sub, const PlanTrajectory& iterate,
                           double mu, const TrustRegion& trust, const Eigen::VectorXd& scale,
                           const ScpConfig& cfg) {
  BarrierSolver<NX, NU> solver(model, sub, iterate, mu, trust, scale, cfg.squared_tracking);
  SubproblemResult out;
  out.newton_iterations = solver.Run(cfg);
  out.model_merit = solver.Merit();
  const auto& pt = solver.point();
  const size_t h = sub.lin.size();
  const Eigen::VectorXd lo = model.InputLower(), hi = model.InputUpper();
  out.candidate.states.resize(h + 1);
  out.candidate.inputs.resize(h);
  out.candidate.states[0] = iterate.states[0];
  for (size_t k = 0; k < h; ++k) {
    out.candidate.states[k + 1] = model.Retract(iterate.states[k + 1], pt.x[k + 1]);
    const Eigen::VectorXd v = pt.v[k];
    out.candidate.inputs[k] = (iterate.inputs[k] + scale.cwiseProduct(v)).cwiseMax(lo).cwiseMin(hi);
  }
  return out;
}

}  // namespace

SubproblemResult SolveSubproblem(const PlanningModel& model, const Subproblem& sub,
                                 const PlanTrajectory& iterate, double mu, const TrustRegion& trust,
                                 const Eigen::VectorXd& input_scale, const ScpConfig& cfg) {
  const size_t horizon = sub.lin.size();
  const int n = model.StateDim();
  const int m = model.InputDim();
  if (horizon == 0 || iterate.inputs.size() != horizon || iterate.states.size() != horizon + 1 ||
      sub.defects.size() != horizon || sub.tracking.size() != horizon + 1 || input_scale.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "subproblem arrays are not length-consistent");
  }
  for (size_t k = 0; k < horizon; ++k) {
    if (sub.lin[k].A.rows() != n || sub.lin[k].A.cols() != n || sub.lin[k].B.rows() != n ||
        sub.lin[k].B.cols() != m || sub.defects[k].size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "linearization has the wrong shape");
    }
  }
  if (!(trust.state > 0.0) || !(trust.input > 0.0)) {
    SubproblemResult out;
    out.candidate = iterate;
    for (const auto& e : sub.tracking) out.model_merit += cfg.squared_tracking ? e.squaredNorm() : e.norm();
    for (const auto& d : sub.defects) out.model_merit += mu * d.lpNorm<1>();
    return out;
  }
  if (n == kStateDim && m == kInputDim) {
    return RunSolver<kStateDim, kInputDim>(model, sub, iterate, mu, trust, input_scale, cfg);
  }
  return RunSolver<Eigen::Dynamic, Eigen::Dynamic>(model, sub, iterate, mu, trust, input_scale, cfg);
}

double TrackingObjective(const PlanningModel& model, const std::vector<Eigen::VectorXd>& states,
                         const std::vector<Eigen::VectorXd>& desired, bool squared) {
  if (states.size() != desired.size()) {
    throw Error(ErrorCode::kLengthMismatch, "trajectory and desired lengths differ");
  }
  double f = 0.0;
  for (size_t k = 0; k < states.size(); ++k) {
    const Eigen::VectorXd e = model.Difference(states[k], desired[k]);
    f += squared ? e.squaredNorm() : e.norm();
  }
  return f;
}

namespace {

double DefectL1(const PlanningModel& model, const PlanTrajectory& traj, double* max_violation) {
  double sum = 0.0, worst = 0.0;
  for (size_t k = 0; k < traj.inputs.size(); ++k) {
    const Eigen::VectorXd d =
        model.Difference(traj.states[k + 1], model.Step(traj.states[k], traj.inputs[k]));
    sum += d.lpNorm<1>();
    worst = std::max(worst, d.lpNorm<Eigen::Infinity>());
  }
  if (max_violation) *max_violation = worst;
  return sum;
}

double TrueMerit(const PlanningModel& model, const PlanTrajectory& traj,
                 const std::vector<Eigen::VectorXd>& desired, double mu, bool squared) {
  return TrackingObjective(model, traj.states, desired, squared) + mu * DefectL1(model, traj, nullptr);
}

// Rolls the map forward from the candidate's initial state with time-varying
// LQR feedback around the candidate, giving a trajectory with zero defects.
std::optional<PlanTrajectory> ProjectByFeedback(const PlanningModel& model, const Subproblem& sub,
                                                const PlanTrajectory& candidate,
                                                const Eigen::VectorXd& scale, const ScpConfig& cfg) {
  const size_t h = sub.lin.size();
  const int n = model.StateDim(), m = model.InputDim();
  const Eigen::MatrixXd q = cfg.projection_state_weight * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = cfg.projection_input_weight * Eigen::MatrixXd::Identity(m, m);
  std::vector<Eigen::MatrixXd> gains(h);
  Eigen::MatrixXd p = q;
  for (size_t k = h; k-- > 0;) {
    const Eigen::MatrixXd& a = sub.lin[k].A;
    const Eigen::MatrixXd bs = sub.lin[k].B * scale.asDiagonal();
    const Eigen::MatrixXd pb = p * bs;
    Eigen::LLT<Eigen::MatrixXd> llt(r + bs.transpose() * pb);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::MatrixXd k_gain = -llt.solve(pb.transpose() * a);
    gains[k] = scale.asDiagonal() * k_gain;
    const Eigen::MatrixXd pn = q + a.transpose() * p * (a + bs * k_gain);
    p = 0.5 * (pn + pn.transpose());
  }
  const Eigen::VectorXd lo = model.InputLower(), hi = model.InputUpper();
  PlanTrajectory out;
  out.states.reserve(h + 1);
  out.inputs.reserve(h);
  out.states.push_back(candidate.states[0]);
  try {
    for (size_t k = 0; k < h; ++k) {
      const Eigen::VectorXd err = model.Difference(out.states[k], candidate.states[k]);
      out.inputs.push_back((candidate.inputs[k] + gains[k] * err).cwiseMax(lo).cwiseMin(hi));
      out.states.push_back(model.Step(out.states[k], out.inputs[k]));
      if (!out.states.back().allFinite()) return std::nullopt;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularAttitude) throw;
    return std::nullopt;
  }
  return out;
}

}  // namespace

double MaxViolation(const PlanningModel& model, const PlanTrajectory& traj) {
  double worst = 0.0;
  DefectL1(model, traj, &worst);
  return worst;
}

std::vector<Eigen::VectorXd> RolloutInputs(const PlanningModel& model, const Eigen::VectorXd& s0,
                                           const std::vector<Eigen::VectorXd>& inputs) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(inputs.size() + 1);
  out.push_back(s0);
  for (const auto& u : inputs) out.push_back(model.Step(out.back(), u));
  return out;
}

double InfeasibilityMeasure(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                            bool squared) {
  if (desired.empty()) throw Error(ErrorCode::kInvalidArgument, "desired trajectory is empty");
  const std::vector<Eigen::VectorXd> inputs(desired.size() - 1, model.NominalInput());
  return TrackingObjective(model, RolloutInputs(model, desired.front(), inputs), desired, squared);
}

PlanResult Plan(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                const ScpConfig& cfg) {
  cfg.Validate();
  if (desired.size() < 2) throw Error(ErrorCode::kInvalidArgument, "desired trajectory needs >= 2 states");
  const int n = model.StateDim();
  for (const auto& s : desired) {
    if (s.size() != n) throw Error(ErrorCode::kDimensionMismatch, "desired state has the wrong size");
    if (!s.allFinite()) throw Error(ErrorCode::kInvalidArgument, "desired state is not finite");
  }
  const size_t horizon = desired.size() - 1;

  PlanTrajectory iterate;
  iterate.states = desired;
  iterate.inputs.assign(horizon, model.NominalInput());

  const Linearization l0 = model.Linearize(iterate.states[0], iterate.inputs[0]);
  Eigen::VectorXd scale(model.InputDim());
  for (int i = 0; i < scale.size(); ++i) {
    const double c = l0.B.col(i).norm();
    scale(i) = c > 0.0 ? 1.0 / c : 1.0;
  }

  PlanResult result;
  PlanTrajectory best = iterate;
  double best_violation = std::numeric_limits<double>::infinity();
  double best_objective = std::numeric_limits<double>::infinity();
  double mu = cfg.penalty_init;
  const bool squared = cfg.squared_tracking;

  for (int round = 0; round < cfg.max_penalty_rounds; ++round) {
    TrustRegion trust{cfg.trust_state, cfg.trust_input};
    double merit = TrueMerit(model, iterate, desired, mu, squared);
    Subproblem sub = BuildSubproblem(model, desired, iterate);
    for (int inner = 0; inner < cfg.max_inner_iters; ++inner) {
      const SubproblemResult sol = SolveSubproblem(model, sub, iterate, mu, trust, scale, cfg);
      ++result.iterations;
      ScpIteration rec;
      rec.round = round;
      rec.mu = mu;
      rec.predicted = merit - sol.model_merit;
      rec.trust_state = trust.state;
      rec.trust_input = trust.input;
      if (rec.predicted <= cfg.stall_tol * (1.0 + std::abs(merit))) {
        rec.merit = merit;
        result.history.push_back(rec);
        break;
      }
      double candidate_merit = std::numeric_limits<double>::infinity();
      const PlanTrajectory* candidate = &sol.candidate;
      try {
        candidate_merit = TrueMerit(model, sol.candidate, desired, mu, squared);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSingularAttitude) throw;
      }
      std::optional<PlanTrajectory> projected;
      if (cfg.feedback_projection) projected = ProjectByFeedback(model, sub, sol.candidate, scale, cfg);
      if (projected) {
        const double m = TrueMerit(model, *projected, desired, mu, squared);
        if (m < candidate_merit) {
          candidate_merit = m;
          candidate = &*projected;
        }
      }
      rec.actual = merit - candidate_merit;
      if (std::isfinite(candidate_merit) && rec.actual >= cfg.improvement_accept_ratio * rec.predicted) {
        rec.accepted = true;
        iterate = *candidate;
        merit = candidate_merit;
        trust.state = std::min(trust.state * cfg.trust_expand, cfg.trust_state * cfg.trust_max_factor);
        trust.input = std::min(trust.input * cfg.trust_expand, cfg.trust_input * cfg.trust_max_factor);
        sub = BuildSubproblem(model, desired, iterate);
      } else {
        trust.state *= cfg.trust_shrink;
        trust.input *= cfg.trust_shrink;
      }
      rec.merit = merit;
      result.history.push_back(rec);
      if (trust.state < cfg.trust_state * cfg.trust_min_factor) break;
    }
    const double violation = MaxViolation(model, iterate);
    const double objective = TrackingObjective(model, iterate.states, desired, squared);
    result.round_violation.push_back(violation);
    result.penalty_rounds = round + 1;
    result.final_penalty = mu;
    if (violation < best_violation || (violation == best_violation && objective < best_objective)) {
      best = iterate;
      best_violation = violation;
      best_objective = objective;
    }
    if (violation <= cfg.feas_tol) {
      result.converged = true;
      break;
    }
    mu *= cfg.penalty_mult;
  }

  const PlanTrajectory& chosen = result.converged ? iterate : best;
  result.ref_states = chosen.states;
  result.ref_inputs = chosen.inputs;
  result.objective = TrackingObjective(model, chosen.states, desired, squared);
  result.max_violation = MaxViolation(model, chosen);
  return result;
}

PlanResult PlanTrajectoryFor(const DynamicsModel& model, const PhysicalParams& params,
                             const DesiredTrajectory& desired, const ScpConfig& cfg) {
  if (std::abs(desired.dt - params.dt) > 1e-9 * params.dt) {
    throw Error(ErrorCode::kInvalidArgument, "desired dt " + std::to_string(desired.dt) +
                                                 " does not match model dt " + std::to_string(params.dt));
  }
  QuadrotorPlanningModel planning(model, params);
  std::vector<Eigen::VectorXd> d(desired.states.begin(), desired.states.end());
  return Plan(planning, d, cfg);
}

std::vector<StateVec> ToStates(const std::vector<Eigen::VectorXd>& v) {
  std::vector<StateVec> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (x.size() != kStateDim) throw Error(ErrorCode::kDimensionMismatch, "expected 12-vectors");
    out.emplace_back(x);
  }
  return out;
}

std::vector<InputVec> ToInputs(const std::vector<Eigen::VectorXd>& v) {
  std::vector<InputVec> out;
  out.reserve(v.size());
  for (const auto& u : v) {
    if (u.size() != kInputDim) throw Error(ErrorCode::kDimensionMismatch, "expected 4-vectors");
    out.emplace_back(u);
  }
  return out;
}

}  // namespace nnquad
