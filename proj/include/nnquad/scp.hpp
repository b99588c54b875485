#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nnquad/dynamics.hpp"
#include "nnquad/trajectory.hpp"

namespace nnquad {

/// First-order model of a discrete map: step(s + ds, u + du) ~ c + A ds + B du.
struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
};

/// Discrete-time dynamics as seen by the planner.
class PlanningModel {
 public:
  virtual ~PlanningModel() = default;

  virtual int StateDim() const = 0;
  virtual int InputDim() const = 0;
  virtual double Dt() const = 0;

  virtual Eigen::VectorXd Step(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const = 0;
  virtual Linearization Linearize(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const = 0;

  /// a - b, with any angular components wrapped.
  virtual Eigen::VectorXd Difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return a - b;
  }
  /// s + delta, with any angular components wrapped.
  virtual Eigen::VectorXd Retract(const Eigen::VectorXd& s, const Eigen::VectorXd& delta) const {
    return s + delta;
  }

  virtual Eigen::VectorXd InputLower() const = 0;
  virtual Eigen::VectorXd InputUpper() const = 0;
  /// Input used for the initial iterate.
  virtual Eigen::VectorXd NominalInput() const = 0;
};

/// Forward-Euler quadrotor map with angle wrapping (no envelope check, so the
/// planner can evaluate trial points outside the flight envelope).
StateVec PlanningStep(const DynamicsModel& model, const StateVec& s, const InputVec& u, double dt);

/// Exact Jacobians of PlanningStep. Kinematic blocks are analytic; learned
/// blocks chain the network Jacobian through the feature map.
/// Throws kSingularAttitude at gimbal lock.
Linearization LinearizeDynamics(const DynamicsModel& model, const StateVec& s, const InputVec& u,
                                double dt);

class QuadrotorPlanningModel : public PlanningModel {
 public:
  QuadrotorPlanningModel(DynamicsModel model, const PhysicalParams& params);

  int StateDim() const override { return kStateDim; }
  int InputDim() const override { return kInputDim; }
  double Dt() const override { return params_.dt; }
  Eigen::VectorXd Step(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const override;
  Linearization Linearize(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const override;
  Eigen::VectorXd Difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override;
  Eigen::VectorXd Retract(const Eigen::VectorXd& s, const Eigen::VectorXd& delta) const override;
  Eigen::VectorXd InputLower() const override;
  Eigen::VectorXd InputUpper() const override;
  Eigen::VectorXd NominalInput() const override;

  const DynamicsModel& model() const { return model_; }

 private:
  DynamicsModel model_;
  PhysicalParams params_;
};

/// 1-D double integrator, state (p, v), input a in [-accel_max, accel_max].
class DoubleIntegratorModel : public PlanningModel {
 public:
  DoubleIntegratorModel(double dt, double accel_max) : dt_(dt), accel_max_(accel_max) {}

  int StateDim() const override { return 2; }
  int InputDim() const override { return 1; }
  double Dt() const override { return dt_; }
  Eigen::VectorXd Step(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const override;
  Linearization Linearize(const Eigen::VectorXd& s, const Eigen::VectorXd& u) const override;
  Eigen::VectorXd InputLower() const override;
  Eigen::VectorXd InputUpper() const override;
  Eigen::VectorXd NominalInput() const override;

 private:
  double dt_;
  double accel_max_;
};

struct ScpConfig {
  double feas_tol = 1e-4;
  double penalty_init = 10.0;
  double penalty_mult = 10.0;
  int max_penalty_rounds = 5;
  double trust_state = 1.0;  // box radius on state steps
  double trust_input = 1.0;  // box radius on scaled input steps
  double trust_expand = 1.5;
  double trust_shrink = 0.5;
  double trust_max_factor = 100.0;  // cap relative to the initial radii
  double trust_min_factor = 1e-8;
  double improvement_accept_ratio = 0.25;
  int max_inner_iters = 50;
  double stall_tol = 1e-5;  // relative predicted improvement below which a round ends
  bool squared_tracking = false;
  // Also try the candidate re-rolled through the map under time-varying LQR
  // feedback, and keep whichever has the lower true merit.
  bool feedback_projection = false;
  double projection_state_weight = 1.0;
  double projection_input_weight = 0.1;
  // Interior-point settings for the convex subproblem.
  double qp_gap_tol = 1e-6;
  double qp_newton_tol = 1e-7;
  double qp_barrier_mult = 8.0;
  int qp_max_newton = 600;

  /// Throws kConfigError when a field is out of range.
  void Validate() const;
};

struct PlanTrajectory {
  std::vector<Eigen::VectorXd> states;  // N+1
  std::vector<Eigen::VectorXd> inputs;  // N
};

struct TrustRegion {
  double state = 1.0;
  double input = 1.0;
};

/// Convexified problem around an iterate.
struct Subproblem {
  std::vector<Linearization> lin;         // per step, at the iterate
  std::vector<Eigen::VectorXd> tracking;  // Difference(s_n, s_d(n)), n = 0..N
  std::vector<Eigen::VectorXd> defects;   // Difference(s_{n+1}, c_n), n = 0..N-1
};

Subproblem BuildSubproblem(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                           const PlanTrajectory& iterate);

struct SubproblemResult {
  PlanTrajectory candidate;
  double model_merit = 0.0;  // linearized merit at the candidate
  int newton_iterations = 0;
};

/// Minimizes sum_n |s(n) - s_d(n)|_2 + mu sum_n |defect_n|_1 over the linearized
/// dynamics inside the trust box and the input bounds, with s(0) pinned.
/// Inputs are scaled by input_scale before the trust box applies.
/// Throws kQpNumericalFailure when the Newton system breaks down.
SubproblemResult SolveSubproblem(const PlanningModel& model, const Subproblem& sub,
                                 const PlanTrajectory& iterate, double mu, const TrustRegion& trust,
                                 const Eigen::VectorXd& input_scale, const ScpConfig& cfg);

/// Tracking objective of a trajectory (sum of l2 norms, or squared norms).
double TrackingObjective(const PlanningModel& model, const std::vector<Eigen::VectorXd>& states,
                         const std::vector<Eigen::VectorXd>& desired, bool squared);

/// Worst dynamics defect |s(n+1) - step(s(n), u(n))|_inf.
double MaxViolation(const PlanningModel& model, const PlanTrajectory& traj);

/// States reached by applying `inputs` from `s0` (N inputs, N+1 states).
std::vector<Eigen::VectorXd> RolloutInputs(const PlanningModel& model, const Eigen::VectorXd& s0,
                                           const std::vector<Eigen::VectorXd>& inputs);

/// Tracking objective of the nominal-input rollout from s_d(0), i.e. the cost
/// of the trivially feasible plan. A useful plan scores below it.
double InfeasibilityMeasure(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                            bool squared);

struct ScpIteration {
  int round = 0;
  double mu = 0.0;
  double merit = 0.0;  // true merit after the iteration
  double predicted = 0.0;
  double actual = 0.0;
  bool accepted = false;
  double trust_state = 0.0;
  double trust_input = 0.0;
};

struct PlanResult {
  std::vector<Eigen::VectorXd> ref_states;
  std::vector<Eigen::VectorXd> ref_inputs;
  double objective = 0.0;
  double max_violation = 0.0;
  int iterations = 0;  // subproblem solves
  int penalty_rounds = 0;
  bool converged = false;
  double final_penalty = 0.0;
  std::vector<ScpIteration> history;
  std::vector<double> round_violation;  // max violation at the end of each round
};

/// Trust-region SCP with an escalating l1 penalty on dynamics defects.
/// The initial iterate is the desired states with the nominal input.
PlanResult Plan(const PlanningModel& model, const std::vector<Eigen::VectorXd>& desired,
                const ScpConfig& cfg);

/// Quadrotor convenience wrapper; desired.dt must equal params.dt.
PlanResult PlanTrajectoryFor(const DynamicsModel& model, const PhysicalParams& params,
                             const DesiredTrajectory& desired, const ScpConfig& cfg);

std::vector<StateVec> ToStates(const std::vector<Eigen::VectorXd>& v);
std::vector<InputVec> ToInputs(const std::vector<Eigen::VectorXd>& v);

}  // namespace nnquad
