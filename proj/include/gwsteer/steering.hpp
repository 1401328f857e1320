#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gwsteer/conic.hpp"
#include "gwsteer/mmspace.hpp"

namespace gwsteer {

struct LinearSystem {
  Eigen::MatrixXd A;  // d x d
  Eigen::MatrixXd B;  // d x m

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

// Axis-aligned box centered at the origin.
struct Box {
  Eigen::VectorXd half_width;

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  void validate(int dim, const char* name) const;
};

struct SteeringInstance {
  LinearSystem system;
  int T = 1;
  Eigen::MatrixXd R;
  double eps = 1.0;
  Box state_box, control_box, terminal_box;
  PointCloud x0, xd;

  void validate() const;
};

struct Trajectory {
  std::vector<Eigen::MatrixXd> states;    // per agent, d x (T+1)
  std::vector<Eigen::MatrixXd> controls;  // per agent, m x T
  std::vector<double> agent_costs;
  std::vector<bool> box_active;  // some inequality slack <= 1e-6 at the optimum
  double control_cost = 0.0;
  double weighted_cost = 0.0;
};

struct TrajectoryCheck {
  double dynamics_residual = 0.0;
  double endpoint_residual = 0.0;
  double box_violation = 0.0;
  bool pass = false;
};

// States 0..T-1 are checked against the state box, state T against the terminal box.
TrajectoryCheck check_trajectory(const SteeringInstance& inst, const Trajectory& traj);

struct AgentSolve {
  Eigen::MatrixXd controls;  // m x T
  Eigen::MatrixXd states;    // d x (T+1)
  double cost = 0.0;
  bool box_active = false;
};

// Precomputed reachability data for one (A, B, T, R, boxes) combination.  Each agent QP has
// the stacked controls as variables; states follow from forward simulation.
class SteeringModel {
 public:
  SteeringModel(const LinearSystem& sys, int T, const Eigen::MatrixXd& R, const Box& state_box,
                const Box& control_box, double qp_tol = 1e-10);

  // Throws InfeasibleError(agent) when xd is unreachable under the boxes.
  AgentSolve solve(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd, int agent = 0) const;

  Eigen::VectorXd free_drift(const Eigen::VectorXd& x0) const { return AT_ * x0; }
  const Eigen::MatrixXd& reach() const { return Phi_; }
  const Eigen::MatrixXd& gramian() const { return W_; }
  bool gramian_invertible() const { return W_invertible_; }
  // 2 W^{-1} (xd - A^T x0): gradient of the unconstrained cost in xd.
  Eigen::VectorXd unconstrained_gradient(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd) const;

  int horizon() const { return T_; }

 private:
  bool feasible(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd) const;

  LinearSystem sys_;
  int T_;
  Eigen::MatrixXd R_;
  Box state_box_, control_box_;
  double qp_tol_;
  Eigen::MatrixXd AT_;                 // A^T (T-step transition)
  std::vector<Eigen::MatrixXd> Apow_;  // A^t, t = 0..T
  Eigen::MatrixXd Phi_;                // d x Tm
  std::vector<Eigen::MatrixXd> S_;     // x_t = A^t x0 + S_t u, t = 1..T-1
  Eigen::MatrixXd W_;
  bool W_invertible_ = false;
  Eigen::LDLT<Eigen::MatrixXd> W_ldlt_;
  Eigen::MatrixXd Gin_;  // inequality rows G u <= h(x0)
};

Trajectory solve_steering(const SteeringInstance& inst, double qp_tol = 1e-10);

struct EnergyOracle {
  Eigen::MatrixXd controls;  // m x T
  double cost = 0.0;
};

EnergyOracle min_energy_oracle(const LinearSystem& sys, int T, const Eigen::MatrixXd& R,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& xd);

}  // namespace gwsteer
