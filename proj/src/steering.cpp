#include "gwsteer/steering.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

void LinearSystem::validate() const {
  if (A.rows() != A.cols() || A.rows() < 1) throw InputError("system matrix A must be square");
  if (B.rows() != A.rows() || B.cols() < 1) throw InputError("input matrix B must have d rows");
  if (!A.allFinite() || !B.allFinite()) throw InputError("system matrices have non-finite entries");
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  return (x.cwiseAbs() - half_width).maxCoeff() <= tol;
}

Eigen::VectorXd Box::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(-half_width).cwiseMin(half_width);
}

void Box::validate(int dim, const char* name) const {
  if (half_width.size() != dim) throw InputError(std::string(name) + " box has wrong dimension");
  if (!(half_width.array() > 0).all() || !half_width.allFinite())
    throw InputError(std::string(name) + " box half-widths must be positive and finite");
}

void SteeringInstance::validate() const {
  system.validate();
  const int d = system.state_dim(), m = system.input_dim();
  if (T < 1) throw InputError("horizon must be positive");
  if (R.rows() != m || R.cols() != m) throw InputError("R must be m x m");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, R.cwiseAbs().maxCoeff()))
    throw InputError("R must be symmetric");
  if (min_eigenvalue(R) <= 0.0) throw InputError("R must be positive definite");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  state_box.validate(d, "state");
  control_box.validate(m, "control");
  terminal_box.validate(d, "terminal");
  x0.validate();
  xd.validate();
  if (x0.size() != xd.size()) throw InputError("initial and destination clouds differ in size");
  if (x0.dim() != d || xd.dim() != d) throw InputError("cloud dimension differs from the system state");
}

SteeringModel::SteeringModel(const LinearSystem& sys, int T, const Eigen::MatrixXd& R, const Box& state_box,
                             const Box& control_box, double qp_tol)
    : sys_(sys), T_(T), R_(R), state_box_(state_box), control_box_(control_box), qp_tol_(qp_tol) {
  sys_.validate();
  const int d = sys.state_dim(), m = sys.input_dim();
  if (T < 1) throw InputError("horizon must be positive");
  state_box_.validate(d, "state");
  control_box_.validate(m, "control");
  Apow_.assign(T + 1, Eigen::MatrixXd::Identity(d, d));
  for (int t = 1; t <= T; ++t) Apow_[t] = sys.A * Apow_[t - 1];
  AT_ = Apow_[T];
  // x_t = A^t x0 + sum_{s<t} A^{t-1-s} B u_s
  auto reach_at = [&](int t) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, T * m);
    for (int s = 0; s < t; ++s) S.block(0, s * m, d, m) = Apow_[t - 1 - s] * sys.B;
    return S;
  };
  Phi_ = reach_at(T);
  for (int t = 1; t < T; ++t) S_.push_back(reach_at(t));
  Eigen::MatrixXd Rinv = R.inverse();
  W_ = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < T; ++s) {
    Eigen::MatrixXd blk = Phi_.block(0, s * m, d, m);
    W_ += blk * Rinv * blk.transpose();
  }
  W_ = 0.5 * (W_ + W_.transpose());
  W_ldlt_.compute(W_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W_, Eigen::EigenvaluesOnly);
  W_invertible_ = es.eigenvalues()(0) > 1e-12 * std::max(1.0, es.eigenvalues()(d - 1));

  const int q = 2 * d * (T - 1) + 2 * m * T;
  Gin_ = Eigen::MatrixXd::Zero(q, T * m);
  int row = 0;
  for (int t = 1; t < T; ++t) {
    Gin_.middleRows(row, d) = S_[t - 1];
    Gin_.middleRows(row + d, d) = -S_[t - 1];
    row += 2 * d;
  }
  for (int t = 0; t < T; ++t)
    for (int a = 0; a < m; ++a) {
      Gin_(row++, t * m + a) = 1.0;
      Gin_(row++, t * m + a) = -1.0;
    }
}

Eigen::VectorXd SteeringModel::unconstrained_gradient(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd) const {
  if (!W_invertible_) throw RankDeficiencyError("controllability Gramian is singular");
  return 2.0 * W_ldlt_.solve(xd - AT_ * x0);
}

namespace {

Eigen::VectorXd inequality_rhs(const std::vector<Eigen::MatrixXd>& Apow, const Box& xbox, const Box& ubox,
                               const Eigen::VectorXd& x0, int T) {
  const int d = static_cast<int>(x0.size()), m = static_cast<int>(ubox.half_width.size());
  Eigen::VectorXd h(2 * d * (T - 1) + 2 * m * T);
  int row = 0;
  for (int t = 1; t < T; ++t) {
    Eigen::VectorXd drift = Apow[t] * x0;
    h.segment(row, d) = xbox.half_width - drift;
    h.segment(row + d, d) = xbox.half_width + drift;
    row += 2 * d;
  }
  for (int t = 0; t < T; ++t)
    for (int a = 0; a < m; ++a) {
      h(row++) = ubox.half_width(a);
      h(row++) = ubox.half_width(a);
    }
  return h;
}

Eigen::SparseMatrix<double> sparse_of(const Eigen::MatrixXd& M) { return M.sparseView(0.0, 0.0); }

}  // namespace

bool SteeringModel::feasible(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd) const {
  // Phase one: minimize t with G u - h <= t, t >= -1, Phi u = xd - A^T x0.
  const int d = sys_.state_dim();
  const int n = static_cast<int>(Phi_.cols());
  const int q = static_cast<int>(Gin_.rows());
  Eigen::VectorXd h = inequality_rhs(Apow_, state_box_, control_box_, x0, T_);
  ConicProgram lp;
  lp.num_vars = n + 1;
  lp.c = Eigen::VectorXd::Zero(n + 1);
  lp.c(n) = 1.0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d + q + 1, n + 1);
  A.topLeftCorner(d, n) = Phi_;
  A.block(d, 0, q, n) = Gin_;
  A.block(d, n, q, 1).setConstant(-1.0);
  A(d + q, n) = -1.0;
  lp.A = sparse_of(A);
  lp.b.resize(d + q + 1);
  lp.b << xd - AT_ * x0, h, 1.0;
  lp.cones = {{ConeKind::zero, d}, {ConeKind::nonneg, q + 1}};
  ConicSolution sol = detail::solve_interior_point(lp, 1e-9, 200);
  if (sol.status == SolveStatus::infeasible) return false;
  if (sol.status != SolveStatus::optimal) throw NumericError("steering phase-one solve failed: " + to_string(sol.status));
  return sol.x(n) <= 1e-7 * std::max(1.0, h.cwiseAbs().maxCoeff());
}

AgentSolve SteeringModel::solve(const Eigen::VectorXd& x0, const Eigen::VectorXd& xd, int agent) const {
  const int d = sys_.state_dim(), m = sys_.input_dim();
  if (x0.size() != d || xd.size() != d) throw InputError("endpoint dimension differs from the system");
  if (!state_box_.contains(x0, 1e-12)) {
    std::ostringstream os;
    os << "agent " << agent << ": initial state lies outside the state box";
    throw InfeasibleError(agent, os.str());
  }
  const int n = T_ * m;
  const int q = static_cast<int>(Gin_.rows());
  Eigen::VectorXd h = inequality_rhs(Apow_, state_box_, control_box_, x0, T_);
  ConicProgram qp;
  qp.num_vars = n;
  qp.c = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Pq = Eigen::MatrixXd::Zero(n, n);
  for (int t = 0; t < T_; ++t) Pq.block(t * m, t * m, m, m) = 2.0 * R_;
  qp.P = sparse_of(Pq);
  Eigen::MatrixXd A(d + q, n);
  A << Phi_, Gin_;
  qp.A = sparse_of(A);
  qp.b.resize(d + q);
  qp.b << xd - AT_ * x0, h;
  qp.cones = {{ConeKind::zero, d}, {ConeKind::nonneg, q}};
  ConicSolution sol = detail::solve_interior_point(qp, qp_tol_, 200);
  if (sol.status != SolveStatus::optimal) {
    if (sol.status == SolveStatus::infeasible || !feasible(x0, xd)) {
      std::ostringstream os;
      os << "agent " << agent << ": destination unreachable within the horizon under the box constraints";
      throw InfeasibleError(agent, os.str());
    }
    std::ostringstream os;
    os << "agent " << agent << ": steering QP ended with status " << to_string(sol.status);
    throw NumericError(os.str());
  }
  AgentSolve out;
  out.controls = Eigen::Map<const Eigen::MatrixXd>(sol.x.data(), m, T_);
  out.states.resize(d, T_ + 1);
  out.states.col(0) = x0;
  for (int t = 0; t < T_; ++t) out.states.col(t + 1) = sys_.A * out.states.col(t) + sys_.B * out.controls.col(t);
  for (int t = 0; t < T_; ++t) out.cost += out.controls.col(t).dot(R_ * out.controls.col(t));
  Eigen::VectorXd slack = h - Gin_ * sol.x;
  out.box_active = q > 0 && slack.minCoeff() <= 1e-6;
  return out;
}

Trajectory solve_steering(const SteeringInstance& inst, double qp_tol) {
  inst.validate();
  SteeringModel model(inst.system, inst.T, inst.R, inst.state_box, inst.control_box, qp_tol);
  Trajectory traj;
  for (int i = 0; i < inst.x0.size(); ++i) {
    if (!inst.terminal_box.contains(inst.xd.point(i), 1e-12)) {
      std::ostringstream os;
      os << "agent " << i << ": destination lies outside the terminal box";
      throw InfeasibleError(i, os.str());
    }
    AgentSolve s = model.solve(inst.x0.point(i), inst.xd.point(i), i);
    traj.states.push_back(s.states);
    traj.controls.push_back(s.controls);
    traj.agent_costs.push_back(s.cost);
    traj.box_active.push_back(s.box_active);
    traj.control_cost += s.cost;
  }
  traj.weighted_cost = inst.eps * traj.control_cost;
  return traj;
}

TrajectoryCheck check_trajectory(const SteeringInstance& inst, const Trajectory& traj) {
  TrajectoryCheck c;
  const int N = inst.x0.size();
  const LinearSystem& s = inst.system;
  for (int i = 0; i < N; ++i) {
    const Eigen::MatrixXd& X = traj.states[i];
    const Eigen::MatrixXd& U = traj.controls[i];
    for (int t = 0; t < inst.T; ++t) {
      c.dynamics_residual = std::max(c.dynamics_residual,
                                     (X.col(t + 1) - s.A * X.col(t) - s.B * U.col(t)).cwiseAbs().maxCoeff());
      c.box_violation = std::max(c.box_violation, (X.col(t).cwiseAbs() - inst.state_box.half_width).maxCoeff());
      c.box_violation = std::max(c.box_violation, (U.col(t).cwiseAbs() - inst.control_box.half_width).maxCoeff());
    }
    c.box_violation = std::max(c.box_violation, (X.col(inst.T).cwiseAbs() - inst.terminal_box.half_width).maxCoeff());
    c.endpoint_residual = std::max(c.endpoint_residual, (X.col(0) - inst.x0.point(i)).cwiseAbs().maxCoeff());
    c.endpoint_residual = std::max(c.endpoint_residual, (X.col(inst.T) - inst.xd.point(i)).cwiseAbs().maxCoeff());
  }
  c.box_violation = std::max(0.0, c.box_violation);
  c.pass = c.dynamics_residual <= 1e-8 && c.endpoint_residual <= 1e-6 && c.box_violation <= 1e-6;
  return c;
}

EnergyOracle min_energy_oracle(const LinearSystem& sys, int T, const Eigen::MatrixXd& R, const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& xd) {
  sys.validate();
  const int d = sys.state_dim(), m = sys.input_dim();
  if (T < 1) throw InputError("horizon must be positive");
  if (R.rows() != m || R.cols() != m) throw InputError("R must be m x m");
  if (x0.size() != d || xd.size() != d) throw InputError("endpoint dimension differs from the system");
  Eigen::MatrixXd AT = Eigen::MatrixXd::Identity(d, d);
  std::vector<Eigen::MatrixXd> blocks(T);
  Eigen::MatrixXd Apow = Eigen::MatrixXd::Identity(d, d);
  for (int s = T - 1; s >= 0; --s) {
    blocks[s] = Apow * sys.B;  // A^{T-1-s} B
    Apow = sys.A * Apow;
  }
  AT = Apow;
  Eigen::MatrixXd Rinv = R.inverse();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < T; ++s) W += blocks[s] * Rinv * blocks[s].transpose();
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (!(ev(0) > 1e-12 * std::max(1.0, ev(d - 1)))) {
    std::ostringstream os;
    os << "controllability Gramian is singular over horizon " << T << " (smallest eigenvalue " << ev(0) << ")";
    throw RankDeficiencyError(os.str());
  }
  Eigen::VectorXd e = xd - AT * x0;
  Eigen::VectorXd lambda = es.eigenvectors() * (es.eigenvectors().transpose() * e).cwiseQuotient(ev);
  EnergyOracle out;
  out.controls.resize(m, T);
  for (int s = 0; s < T; ++s) out.controls.col(s) = Rinv * blocks[s].transpose() * lambda;
  out.cost = e.dot(lambda);
  return out;
}

}  // namespace gwsteer
