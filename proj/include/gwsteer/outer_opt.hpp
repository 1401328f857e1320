#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gwsteer/conic.hpp"
#include "gwsteer/mmspace.hpp"
#include "gwsteer/sdp_relax.hpp"
#include "gwsteer/steering.hpp"

namespace gwsteer {

struct OuterConfig {
  int max_outer_iters = 50;
  double sdp_tol = 1e-5;
  double qp_tol = 1e-10;
  std::string step_rule = "backtracking";
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  double delta_J_tol = 1e-6;
  int max_inner_iters = 200;
  int max_backtracks = 40;
  double fd_step = 1e-6;
  double slack_threshold = 1e-6;
  std::uint64_t seed = 0;
  SdpOptions sdp;

  void validate() const;
};

// Scenario context: dynamics, boxes, initial cloud and the reference cost matrix C^y the
// destination cloud is compared against (target pairwise costs or a graph metric).
struct Scenario {
  LinearSystem system;
  int T = 10;
  Eigen::MatrixXd R;
  double eps = 1.0;
  Box state_box, control_box, terminal_box;
  PointCloud x0;
  MetricMatrix reference;
  CostKind moving_cost = CostKind::squared_euclidean;

  void validate() const;
  SteeringModel steering_model(double qp_tol) const;
};

struct JEvaluation {
  double J = 0.0;
  double rho = 0.0;
  double gw = 0.0;
  Certificate certificate;
  SdpSolve sdp;
  std::vector<double> agent_costs;
  std::vector<bool> box_active;
  bool projected = false;
};

JEvaluation evaluate_J(const PointCloud& xd, const Scenario& ctx, const OuterConfig& cfg);

// Gradient of F(x_d) = sum_{(i,j),(i',j')} W[(i,j),(i',j')] g(c(x_d^i, x_d^i'), C^y_{jj'}) for a
// symmetric weight W; W = vec(P) vec(P)' is the fixed-coupling case.
struct WeightedGw {
  double value = 0.0;
  Eigen::MatrixXd gradient;  // d x N
};
WeightedGw weighted_gw(const PointCloud& xd, const Eigen::MatrixXd& W, const MetricMatrix& reference,
                       CostKind moving_cost = CostKind::squared_euclidean);

PointCloud fixed_coupling_gradient(const PointCloud& xd, const Coupling& P, const PointCloud& target,
                                   CostKind cost = CostKind::squared_euclidean);
PointCloud fixed_coupling_gradient(const PointCloud& xd, const Coupling& P, const MetricMatrix& reference,
                                   CostKind cost = CostKind::squared_euclidean);

enum class OuterStatus { converged, max_iters };
std::string to_string(OuterStatus s);

struct OuterIterate {
  PointCloud xd;
  double J = 0.0;
  double rho = 0.0;
  double gw = 0.0;
  Certificate certificate;
};

struct OuterHistory {
  std::vector<OuterIterate> iterates;
  OuterStatus status = OuterStatus::max_iters;
};

struct OuterResult {
  PointCloud xd;
  OuterHistory history;
  JEvaluation final;
  bool initial_projected = false;
};

// Block-coordinate descent: SDP at the current x_d, then projected backtracking gradient on
// eps*rho + <G(x_d), Qhat>, which majorizes J and coincides with the fixed-coupling surrogate
// when the relaxation returns a rank-one lift.
OuterResult minimize_J(const Scenario& ctx, const OuterConfig& cfg, const PointCloud* init = nullptr);

}  // namespace gwsteer
