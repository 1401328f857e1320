#include "gwsteer/harness.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

ClusterDiagnostics cluster_diagnostics(const PointCloud& xd, const Coupling& P, const GroupSpec& groups,
                                       CostKind cost) {
  const int N = xd.size();
  groups.validate(N);
  if (P.size() != N) throw InputError("cluster_diagnostics: coupling size mismatch");
  ClusterDiagnostics cd;
  cd.cost = to_string(cost);
  cd.assignment = extract_assignment(P).sigma;
  for (int i = 0; i < N; ++i) cd.label.push_back(groups.group_of[cd.assignment[i]]);

  const Eigen::MatrixXd C = pairwise_cost(xd, cost).entries;
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (int i = 0; i < N; ++i)
    for (int k = i + 1; k < N; ++k) {
      if (cd.label[i] == cd.label[k]) {
        intra += C(i, k);
        ++n_intra;
      } else {
        inter += C(i, k);
        ++n_inter;
      }
    }
  cd.intra_mean = n_intra ? intra / n_intra : 0.0;
  cd.inter_mean = n_inter ? inter / n_inter : 0.0;
  cd.ratio = (n_intra && n_inter && cd.inter_mean > 0) ? cd.intra_mean / cd.inter_mean : 0.0;
  cd.configured_ratio = groups.intra_weight / groups.inter_weight;
  cd.threshold = 0.5 * (groups.intra_weight + groups.inter_weight);

  // single linkage via union-find
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < N; ++i)
    for (int k = i + 1; k < N; ++k)
      if (C(i, k) <= cd.threshold) parent[find(i)] = find(k);
  std::vector<int> root_id(N, -1);
  int next = 0;
  cd.cluster_of.resize(N);
  for (int i = 0; i < N; ++i) {
    const int r = find(i);
    if (root_id[r] < 0) root_id[r] = next++;
    cd.cluster_of[i] = root_id[r];
  }
  cd.cluster_sizes.assign(next, 0);
  for (int c : cd.cluster_of) ++cd.cluster_sizes[c];
  std::sort(cd.cluster_sizes.begin(), cd.cluster_sizes.end());

  cd.clusters_match_groups = true;
  for (int i = 0; i < N; ++i)
    for (int k = i + 1; k < N; ++k)
      if ((cd.cluster_of[i] == cd.cluster_of[k]) != (cd.label[i] == cd.label[k])) cd.clusters_match_groups = false;
  return cd;
}

namespace {

std::string context(int run, std::uint64_t seed, double eps) {
  std::ostringstream os;
  os << "run " << run << " (seed " << seed << ", eps " << eps << ")";
  return os.str();
}

}  // namespace

RunRecord run_single(const ScenarioConfig& cfg, int run, double eps) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.run_id = run;
  rec.seed = cfg.seed + static_cast<std::uint64_t>(run);
  rec.eps = eps;
  const Scenario sc = cfg.scenario(run, eps);
  rec.x0 = sc.x0;
  rec.reference = sc.reference;
  if (cfg.has_target) rec.target = target_cloud(cfg.target, cfg.N, cfg.d).points;

  try {
    const OuterResult res = minimize_J(sc, cfg.outer);
    rec.status = to_string(res.history.status);
    rec.initial_projected = res.initial_projected;
    rec.xd = res.xd;
    rec.rho = res.final.rho;
    rec.gw = res.final.gw;
    rec.J = res.final.J;
    rec.certificate = res.final.certificate;
    rec.P = res.final.sdp.pair.P;
    rec.relaxed = res.final.sdp.relaxed;
    rec.sdp_method = res.final.sdp.method;
    rec.polished = res.final.sdp.polished;
    for (const OuterIterate& it : res.history.iterates)
      rec.history.push_back({it.J, it.rho, it.gw, it.certificate.ratio, it.certificate.rank_gap});

    SteeringInstance inst;
    inst.system = sc.system;
    inst.T = sc.T;
    inst.R = sc.R;
    inst.eps = eps;
    inst.state_box = sc.state_box;
    inst.control_box = sc.control_box;
    inst.terminal_box = sc.terminal_box;
    inst.x0 = sc.x0;
    inst.xd = rec.xd;
    rec.trajectory = solve_steering(inst, cfg.outer.qp_tol);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(e.agent, context(run, rec.seed, eps) + ": " + e.what());
  } catch (const CertificateError& e) {
    throw CertificateError(context(run, rec.seed, eps) + ": " + e.what());
  } catch (const RankDeficiencyError& e) {
    throw RankDeficiencyError(context(run, rec.seed, eps) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context(run, rec.seed, eps) + ": " + e.what());
  }

  if (cfg.metric_mode == MetricMode::graph_groups) {
    rec.has_cluster = true;
    rec.cluster = cluster_diagnostics(rec.xd, rec.P, cfg.groups, cfg.cost);
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

namespace {

ExperimentReport base_report(const ScenarioConfig& cfg, const char* kind) {
  ExperimentReport rep;
  rep.kind = kind;
  rep.config = cfg.echo();
  if (cfg.metric_mode == MetricMode::graph_groups) cfg.reference(&rep.warnings);
  return rep;
}

}  // namespace

ExperimentReport run_experiment(const ScenarioConfig& cfg) {
  ExperimentReport rep = base_report(cfg, "run");
  if (cfg.eps_list.size() > 1) rep.warnings.push_back("eps_list given; run uses its first entry");
  for (int k = 0; k < cfg.runs; ++k) rep.runs.push_back(run_single(cfg, k, cfg.eps_list.front()));
  return rep;
}

ExperimentReport sweep_epsilon(const ScenarioConfig& cfg, const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw InputError("sweep: eps list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0)) throw InputError("sweep: eps values must be positive");
    if (i > 0 && !(eps_list[i] > eps_list[i - 1])) throw InputError("sweep: eps values must be sorted ascending");
  }
  ExperimentReport rep = base_report(cfg, "sweep");
  rep.config["eps_list"] = eps_list;
  rep.config.erase("eps");
  for (double eps : eps_list) {
    SweepRow row;
    row.eps = eps;
    try {
      RunRecord rec = run_single(cfg, 0, eps);
      rec.run_id = static_cast<int>(rep.runs.size());
      row.ok = true;
      row.control_cost = rec.rho;
      row.gw_distance = rec.gw;
      row.J = rec.J;
      rep.runs.push_back(std::move(rec));
    } catch (const InfeasibleError& e) {
      row.error = e.what();
      row.error_class = 2;
    } catch (const NumericError& e) {
      row.error = e.what();
      row.error_class = 3;
    } catch (const CertificateError& e) {
      row.error = e.what();
      row.error_class = 3;
    }
    rep.sweep.push_back(row);
  }

  std::vector<const SweepRow*> ok;
  for (const SweepRow& r : rep.sweep)
    if (r.ok) ok.push_back(&r);
  for (std::size_t i = 1; i < ok.size(); ++i) {
    if (ok[i]->control_cost > ok[i - 1]->control_cost) rep.control_nonincreasing = false;
    if (ok[i]->gw_distance < ok[i - 1]->gw_distance) rep.gw_nondecreasing = false;
  }
  rep.extremes_strict = ok.size() >= 2 && ok.front()->control_cost > ok.back()->control_cost &&
                        ok.front()->gw_distance < ok.back()->gw_distance;
  return rep;
}

ExperimentReport grouping_experiment(const ScenarioConfig& cfg) {
  if (cfg.metric_mode != MetricMode::graph_groups)
    throw InputError("group: config metric mode must be graph_groups");
  ExperimentReport rep = run_experiment(cfg);
  rep.kind = "group";
  return rep;
}

}  // namespace gwsteer
