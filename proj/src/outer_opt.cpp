#include "gwsteer/outer_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gwsteer/errors.hpp"

namespace gwsteer {

void OuterConfig::validate() const {
  if (max_outer_iters < 1) throw InputError("max_outer_iters must be >= 1");
  if (!(sdp_tol > 0) || !(qp_tol > 0)) throw InputError("solver tolerances must be positive");
  if (step_rule != "backtracking") throw InputError("unknown step_rule '" + step_rule + "'");
  if (!(initial_step > 0)) throw InputError("initial_step must be positive");
  if (!(shrink > 0 && shrink < 1)) throw InputError("shrink must lie in (0,1)");
  if (!(sufficient_decrease > 0 && sufficient_decrease < 1))
    throw InputError("sufficient_decrease must lie in (0,1)");
  if (!(delta_J_tol > 0)) throw InputError("delta_J_tol must be positive");
  if (max_inner_iters < 1 || max_backtracks < 1) throw InputError("inner iteration caps must be >= 1");
  if (!(fd_step > 0)) throw InputError("fd_step must be positive");
}

void Scenario::validate() const {
  system.validate();
  const int d = system.state_dim();
  if (T < 1) throw InputError("horizon T must be >= 1");
  if (!(eps > 0) || !std::isfinite(eps)) throw InputError("eps must be positive");
  state_box.validate(d, "state");
  control_box.validate(system.input_dim(), "control");
  terminal_box.validate(d, "terminal");
  x0.validate();
  if (x0.dim() != d) throw InputError("initial cloud dimension does not match the system");
  reference.validate();
  if (reference.size() != x0.size())
    throw InputError("reference cost matrix size does not match the number of agents");
  if (moving_cost == CostKind::graph)
    throw CapabilityError("graph cost cannot be applied to the moving cloud");
  for (int i = 0; i < x0.size(); ++i)
    if (!state_box.contains(x0.point(i), 1e-12))
      throw InputError("initial point " + std::to_string(i + 1) + " lies outside the state box");
}

SteeringModel Scenario::steering_model(double qp_tol) const {
  return SteeringModel(system, T, R, state_box, control_box, qp_tol);
}

std::string to_string(OuterStatus s) { return s == OuterStatus::converged ? "converged" : "max_iters"; }

WeightedGw weighted_gw(const PointCloud& xd, const Eigen::MatrixXd& W, const MetricMatrix& reference,
                       CostKind moving_cost) {
  const int N = xd.size();
  const int d = xd.dim();
  if (reference.size() != N || W.rows() != N * N || W.cols() != N * N)
    throw InputError("weighted_gw: size mismatch");
  if (moving_cost == CostKind::graph) throw CapabilityError("graph cost cannot be differentiated");
  const Eigen::MatrixXd& Cy = reference.entries;

  // aggregate the weight over reference indices
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N, N), Tm = S, U = S;
  for (int b = 0; b < N; ++b)
    for (int jp = 0; jp < N; ++jp) {
      const int col = flat_index(b, jp, N);
      for (int j = 0; j < N; ++j)
        for (int a = 0; a < N; ++a) {
          const double w = W(flat_index(a, j, N), col);
          S(a, b) += w;
          Tm(a, b) += w * Cy(j, jp);
          U(a, b) += w * Cy(j, jp) * Cy(j, jp);
        }
    }

  WeightedGw out;
  out.gradient = Eigen::MatrixXd::Zero(d, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      const Eigen::VectorXd diff = xd.points.col(a) - xd.points.col(b);
      const double sq = diff.squaredNorm();
      const double D = moving_cost == CostKind::squared_euclidean ? sq : std::sqrt(sq);
      out.value += 0.5 * (S(a, b) * D * D - 2.0 * Tm(a, b) * D + U(a, b));
      if (a == b) continue;
      // symmetric W: the (a,b) and (b,a) terms contribute equally to d/dx_a
      const double g = 2.0 * (S(a, b) * D - Tm(a, b));
      if (moving_cost == CostKind::squared_euclidean) {
        out.gradient.col(a) += 2.0 * g * diff;
      } else if (D > 0) {
        out.gradient.col(a) += g * diff / D;
      }
    }
  return out;
}

PointCloud fixed_coupling_gradient(const PointCloud& xd, const Coupling& P, const MetricMatrix& reference,
                                   CostKind cost) {
  if (P.size() != xd.size()) throw InputError("fixed_coupling_gradient: coupling size mismatch");
  const Eigen::VectorXd p = P.vec();
  const Eigen::MatrixXd W = p * p.transpose();
  return PointCloud(weighted_gw(xd, W, reference, cost).gradient);
}

PointCloud fixed_coupling_gradient(const PointCloud& xd, const Coupling& P, const PointCloud& target,
                                   CostKind cost) {
  return fixed_coupling_gradient(xd, P, pairwise_cost(target, cost), cost);
}

namespace {

struct RhoEval {
  double total = 0.0;
  std::vector<double> costs;
  std::vector<bool> active;
};

RhoEval eval_rho(const SteeringModel& model, const PointCloud& x0, const PointCloud& xd) {
  RhoEval r;
  for (int i = 0; i < xd.size(); ++i) {
    const AgentSolve s = model.solve(x0.point(i), xd.point(i), i);
    r.costs.push_back(s.cost);
    r.active.push_back(s.box_active);
    r.total += s.cost;
  }
  return r;
}

double rho_value(const SteeringModel& model, const Eigen::VectorXd& x0, const Eigen::VectorXd& xd, int agent) {
  return model.solve(x0, xd, agent).cost;
}

// d rho_i / d xd_i; closed form off the box constraints, central differences otherwise
Eigen::MatrixXd rho_gradient(const SteeringModel& model, const PointCloud& x0, const PointCloud& xd,
                             const RhoEval& rho, double h) {
  const int d = xd.dim();
  Eigen::MatrixXd g(d, xd.size());
  for (int i = 0; i < xd.size(); ++i) {
    if (!rho.active[i] && model.gramian_invertible()) {
      g.col(i) = model.unconstrained_gradient(x0.point(i), xd.point(i));
      continue;
    }
    for (int a = 0; a < d; ++a) {
      Eigen::VectorXd xp = xd.point(i), xm = xd.point(i);
      xp(a) += h;
      xm(a) -= h;
      double fp = 0, fm = 0;
      bool okp = true, okm = true;
      try { fp = rho_value(model, x0.point(i), xp, i); } catch (const InfeasibleError&) { okp = false; }
      try { fm = rho_value(model, x0.point(i), xm, i); } catch (const InfeasibleError&) { okm = false; }
      if (okp && okm) g(a, i) = (fp - fm) / (2 * h);
      else if (okp) g(a, i) = (fp - rho.costs[i]) / h;
      else if (okm) g(a, i) = (rho.costs[i] - fm) / h;
      else g(a, i) = 0.0;
    }
  }
  return g;
}

PointCloud clamp_cloud(const PointCloud& x, const Box& box) {
  Eigen::MatrixXd pts = x.points;
  for (int i = 0; i < x.size(); ++i) pts.col(i) = box.clamp(x.points.col(i));
  return PointCloud(pts);
}

JEvaluation evaluate_with(const PointCloud& xd, const Scenario& ctx, const OuterConfig& cfg,
                          const SteeringModel& model, const Coupling* previous = nullptr) {
  JEvaluation ev;
  const RhoEval rho = eval_rho(model, ctx.x0, xd);
  ev.rho = rho.total;
  ev.agent_costs = rho.costs;
  ev.box_active = rho.active;
  const LossTensor G = build_loss_tensor(pairwise_cost(xd, ctx.moving_cost), ctx.reference);
  SdpOptions opts = cfg.sdp;
  if (previous) opts.extra_candidates.push_back(*previous);
  ev.sdp = solve_gw_sdp(G, cfg.sdp_tol, opts);
  ev.gw = ev.sdp.value.value;
  ev.certificate = ev.sdp.certificate;
  ev.J = ctx.eps * ev.rho + ev.gw;
  return ev;
}

}  // namespace

JEvaluation evaluate_J(const PointCloud& xd, const Scenario& ctx, const OuterConfig& cfg) {
  ctx.validate();
  cfg.validate();
  if (xd.size() != ctx.x0.size() || xd.dim() != ctx.x0.dim())
    throw InputError("evaluate_J: destination cloud shape mismatch");
  PointCloud x = xd;
  bool projected = false;
  for (int i = 0; i < x.size(); ++i)
    if (!ctx.terminal_box.contains(x.point(i))) projected = true;
  if (projected) x = clamp_cloud(x, ctx.terminal_box);
  const SteeringModel model = ctx.steering_model(cfg.qp_tol);
  JEvaluation ev = evaluate_with(x, ctx, cfg, model);
  ev.projected = projected;
  return ev;
}

OuterResult minimize_J(const Scenario& ctx, const OuterConfig& cfg, const PointCloud* init) {
  ctx.validate();
  cfg.validate();
  const SteeringModel model = ctx.steering_model(cfg.qp_tol);
  const int N = ctx.x0.size();
  const int d = ctx.x0.dim();

  OuterResult res;
  PointCloud x;
  if (init) {
    if (init->size() != N || init->dim() != d) throw InputError("minimize_J: initial guess shape mismatch");
    x = *init;
  } else {
    Eigen::MatrixXd pts(d, N);
    for (int i = 0; i < N; ++i) pts.col(i) = model.free_drift(ctx.x0.point(i));
    x = PointCloud(pts);
  }
  for (int i = 0; i < N; ++i)
    if (!ctx.terminal_box.contains(x.point(i))) res.initial_projected = true;
  x = clamp_cloud(x, ctx.terminal_box);

  JEvaluation ev = evaluate_with(x, ctx, cfg, model);
  res.history.iterates.push_back({x, ev.J, ev.rho, ev.gw, ev.certificate});

  const double inf = std::numeric_limits<double>::infinity();
  double step = cfg.initial_step;
  res.history.status = OuterStatus::max_iters;

  for (int k = 0; k < cfg.max_outer_iters; ++k) {
    const Eigen::MatrixXd W = ev.sdp.pair.Qhat;

    auto surrogate = [&](const PointCloud& y, RhoEval* rho_out) -> double {
      try {
        RhoEval r = eval_rho(model, ctx.x0, y);
        const double v = ctx.eps * r.total + weighted_gw(y, W, ctx.reference, ctx.moving_cost).value;
        if (rho_out) *rho_out = std::move(r);
        return v;
      } catch (const InfeasibleError&) {
        return inf;
      }
    };

    // descent on the majorizer with Qhat frozen
    PointCloud y = x;
    RhoEval rho_y;
    double Fy = surrogate(y, &rho_y);
    if (!std::isfinite(Fy)) throw NumericError("minimize_J: current iterate became unreachable");
    Eigen::MatrixXd prev_grad, prev_y;
    for (int inner = 0; inner < cfg.max_inner_iters; ++inner) {
      const WeightedGw wg = weighted_gw(y, W, ctx.reference, ctx.moving_cost);
      const Eigen::MatrixXd grad =
          ctx.eps * rho_gradient(model, ctx.x0, y, rho_y, cfg.fd_step) + wg.gradient;
      if (inner > 0) {
        // Barzilai-Borwein trial step, safeguarded by the backtracking below
        const Eigen::MatrixXd sk = y.points - prev_y, yk = grad - prev_grad;
        const double sy = (sk.array() * yk.array()).sum();
        if (sy > 0) step = std::clamp(sk.squaredNorm() / sy, 1e-10, 1e6 * cfg.initial_step);
      }
      prev_grad = grad;
      prev_y = y.points;
      bool accepted = false;
      PointCloud yn;
      RhoEval rho_n;
      double Fn = inf;
      for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
        yn = clamp_cloud(PointCloud(y.points - step * grad), ctx.terminal_box);
        const Eigen::MatrixXd dir = yn.points - y.points;
        if (dir.norm() <= 1e-14 * (1.0 + y.points.norm())) break;
        Fn = surrogate(yn, &rho_n);
        if (Fn <= Fy + cfg.sufficient_decrease * (grad.array() * dir.array()).sum()) {
          accepted = true;
          break;
        }
        step *= cfg.shrink;
      }
      if (!accepted) break;
      const double dec = Fy - Fn;
      y = yn;
      Fy = Fn;
      rho_y = std::move(rho_n);
      if (dec < 0.1 * cfg.delta_J_tol) break;
    }

    const JEvaluation ev_new = evaluate_with(y, ctx, cfg, model, &ev.sdp.pair.P);
    const double change = ev.J - ev_new.J;
    if (!(ev_new.J <= ev.J)) {
      // increase within the relaxation accuracy counts as stationarity
      if (-change <= cfg.sdp_tol * std::max(1.0, std::abs(ev.J))) res.history.status = OuterStatus::converged;
      break;
    }
    x = y;
    ev = ev_new;
    res.history.iterates.push_back({x, ev.J, ev.rho, ev.gw, ev.certificate});
    if (change < cfg.delta_J_tol) {
      res.history.status = OuterStatus::converged;
      break;
    }
  }

  res.xd = x;
  res.final = ev;
  return res;
}

}  // namespace gwsteer
