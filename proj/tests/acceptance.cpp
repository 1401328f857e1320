// Acceptance suite.  `gwsteer_acceptance` runs every criterion; `gwsteer_acceptance k` runs only
// criterion k.  One PASS/FAIL line is printed per criterion; the exit code is nonzero if any fails.

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "gwsteer/config.hpp"
#include "gwsteer/errors.hpp"
#include "gwsteer/harness.hpp"
#include "gwsteer/outer_opt.hpp"
#include "gwsteer/report_io.hpp"
#include "gwsteer/sdp_relax.hpp"
#include "gwsteer/steering.hpp"
#include "oracles.hpp"

using namespace gwsteer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string config_path(const std::string& name) { return std::string(GWSTEER_CONFIG_DIR) + "/" + name; }

LinearSystem replica_system() {
  LinearSystem s;
  s.A.resize(2, 2);
  s.A << 0.5, 0.2, 0.1, 0.4;
  s.B = Eigen::MatrixXd::Identity(2, 2);
  return s;
}

// 1. mean ratio within 1e-3 of one and every rank gap <= 1e-5 over the ten replica runs
Outcome certificate_replication() {
  const ScenarioConfig cfg = load_config(config_path("replica.json"));
  const ExperimentReport rep = run_experiment(cfg);
  double mean = 0.0, worst_gap = 0.0;
  for (const RunRecord& r : rep.runs) {
    mean += r.certificate.ratio;
    worst_gap = std::max(worst_gap, r.certificate.rank_gap);
  }
  mean /= rep.runs.size();
  const bool ok = rep.runs.size() == 10 && std::abs(mean - 1.0) <= 1e-3 && worst_gap <= 1e-5;
  return {ok, fmt("runs %zu, mean ratio %.8f, max rank gap %.3e", rep.runs.size(), mean, worst_gap)};
}

// 2. control cost non-increasing, GW non-decreasing, extremes strictly ordered
Outcome tradeoff_trend() {
  const ScenarioConfig cfg = load_config(config_path("sweep.json"));
  const std::vector<double> eps{0.1, 0.5, 1.0, 2.5};
  const ExperimentReport rep = sweep_epsilon(cfg, eps);
  bool ok = rep.sweep.size() == eps.size();
  std::ostringstream os;
  for (const SweepRow& s : rep.sweep) {
    ok = ok && s.ok;
    os << fmt("eps %.2g: %.4f/%.4f  ", s.eps, s.control_cost, s.gw_distance);
  }
  if (ok) {
    for (std::size_t k = 1; k < rep.sweep.size(); ++k) {
      ok = ok && rep.sweep[k].control_cost <= rep.sweep[k - 1].control_cost;
      ok = ok && rep.sweep[k].gw_distance >= rep.sweep[k - 1].gw_distance;
    }
    ok = ok && rep.sweep.back().control_cost < rep.sweep.front().control_cost &&
         rep.sweep.back().gw_distance > rep.sweep.front().gw_distance;
  }
  return {ok, os.str() + "(control/gw)"};
}

// 3. N = 2: relaxation value <= grid + 1e-6; certified instances match the grid optimum within 1e-5
Outcome oracle_equivalence() {
  std::mt19937 rng(2024);
  std::normal_distribution<double> g;
  int certified = 0, bad_bound = 0, bad_match = 0;
  double worst_bound = -1e300, worst_match = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::MatrixXd X(2, 2), Y(2, 2);
    for (int e = 0; e < 4; ++e) X(e) = 2 * g(rng), Y(e) = 2 * g(rng);
    const Eigen::MatrixXd Cx = oracle::sq_dist(X), Cy = oracle::sq_dist(Y);
    const auto [grid, arg] = oracle::grid_min(Cx, Cy);
    (void)arg;
    const SdpSolve s = solve_gw_sdp(build_loss_tensor(MetricMatrix{Cx}, MetricMatrix{Cy}), 1e-8);
    worst_bound = std::max(worst_bound, s.raw_value - grid);
    if (s.raw_value > grid + 1e-6) ++bad_bound;
    if (s.certificate.is_global) {
      ++certified;
      const double v = oracle::gw_sum(s.pair.P.entries, Cx, Cy);
      worst_match = std::max(worst_match, std::abs(v - grid));
      if (std::abs(v - grid) > 1e-5) ++bad_match;
    }
  }
  return {bad_bound == 0 && bad_match == 0,
          fmt("50 instances, sdp - grid max %.3e, certified %d, max |GW(P) - grid| %.3e", worst_bound, certified,
              worst_match)};
}

// 4. rigidly related clouds: value <= 1e-6, ratio 1, rank gap <= 1e-5
Outcome zero_optimum() {
  int failures = 0, total = 0;
  double worst_value = 0.0, worst_gap = 0.0, worst_ratio_dev = 0.0;
  for (int N : {3, 6, 10})
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937 rng(1000 * N + seed);
      std::uniform_real_distribution<double> u(-3.0, 3.0), ang(0.0, 2 * M_PI);
      Eigen::MatrixXd X(2, N);
      for (int e = 0; e < X.size(); ++e) X(e) = u(rng);
      Eigen::MatrixXd Y = oracle::rotation2(ang(rng)) * X;
      if (seed % 2) Y.row(0) *= -1.0;  // reflections are isometries too
      Y.colwise() += Eigen::Vector2d(u(rng), u(rng));
      std::vector<int> perm(N);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const Eigen::MatrixXd Yp = Y(Eigen::all, perm);
      const LossTensor G = build_loss_tensor(pairwise_cost(PointCloud(X), CostKind::squared_euclidean),
                                             pairwise_cost(PointCloud(Yp), CostKind::squared_euclidean));
      const SdpSolve s = solve_gw_sdp(G, 1e-8);
      ++total;
      worst_value = std::max(worst_value, s.value.value);
      worst_gap = std::max(worst_gap, s.certificate.rank_gap);
      worst_ratio_dev = std::max(worst_ratio_dev, std::abs(s.certificate.ratio - 1.0));
      if (!(s.value.value <= 1e-6 && s.certificate.ratio == 1.0 && s.certificate.rank_gap <= 1e-5)) ++failures;
    }
  return {failures == 0, fmt("%d instances, %d failures, max value %.3e, max |ratio-1| %.3e, max rank gap %.3e",
                             total, failures, worst_value, worst_ratio_dev, worst_gap)};
}

// 5. unconstrained regime: cost equals the Gramian form within 1e-6 relative; trajectory invariants hold
Outcome steering_oracle() {
  const LinearSystem sys = replica_system();
  const int T = 10;
  std::mt19937 rng(77);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> start(-15.0, -12.0), lateral(-2.0, 2.0), dest(-4.0, 4.0);
  int solved = 0, skipped = 0, failures = 0;
  double worst_rel = 0.0, worst_dyn = 0.0, worst_end = 0.0, worst_box = 0.0;
  while (solved < 100) {
    Eigen::MatrixXd L(2, 2);
    for (int e = 0; e < 4; ++e) L(e) = 0.5 * g(rng);
    const Eigen::MatrixXd R = L * L.transpose() + Eigen::MatrixXd::Identity(2, 2);
    // Gramian built directly from the powers of A
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 2), Ak = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd Rinv = R.inverse();
    for (int t = 0; t < T; ++t) {
      W += Ak * sys.B * Rinv * sys.B.transpose() * Ak.transpose();
      Ak = Ak * sys.A;
    }
    const int N = 3;
    Eigen::MatrixXd X0(2, N), XD(2, N);
    for (int i = 0; i < N; ++i) {
      X0.col(i) << start(rng), lateral(rng);
      XD.col(i) << dest(rng), dest(rng);
    }
    SteeringInstance inst;
    inst.system = sys;
    inst.T = T;
    inst.R = R;
    inst.eps = 0.5;
    inst.state_box = inst.control_box = inst.terminal_box = Box{Eigen::VectorXd::Constant(2, 20.0)};
    inst.x0 = PointCloud(X0);
    inst.xd = PointCloud(XD);
    // the regime is decided by the unconstrained optimum, computed independently
    bool inside = true;
    for (int i = 0; i < N && inside; ++i) {
      Eigen::MatrixXd U;
      oracle::kkt_min_energy(sys.A, sys.B, T, R, X0.col(i), XD.col(i), &U);
      Eigen::VectorXd x = X0.col(i);
      for (int t = 0; t < T; ++t) {
        inside = inside && U.col(t).cwiseAbs().maxCoeff() < 20.0 && x.cwiseAbs().maxCoeff() < 20.0;
        x = sys.A * x + sys.B * U.col(t);
      }
    }
    if (!inside) {
      ++skipped;
      continue;
    }
    const Trajectory tr = solve_steering(inst);
    const TrajectoryCheck c = check_trajectory(inst, tr);
    bool ok = true;
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd r = XD.col(i) - Ak * X0.col(i);
      const double closed = r.dot(W.ldlt().solve(r));
      const double rel = std::abs(tr.agent_costs[i] - closed) / std::max(std::abs(closed), 1e-300);
      worst_rel = std::max(worst_rel, rel);
      ok = ok && rel <= 1e-6;
    }
    worst_dyn = std::max(worst_dyn, c.dynamics_residual);
    worst_end = std::max(worst_end, c.endpoint_residual);
    worst_box = std::max(worst_box, c.box_violation);
    ok = ok && c.dynamics_residual <= 1e-8 && c.endpoint_residual <= 1e-6 && c.box_violation <= 0.0;
    if (!ok) ++failures;
    ++solved;
  }
  return {failures == 0, fmt("100 instances (%d resampled), %d failures, max rel cost err %.3e, dyn %.3e, "
                             "endpoint %.3e, box %.3e",
                             skipped, failures, worst_rel, worst_dyn, worst_end, worst_box)};
}

// 6. J non-increasing within 1e-9 on the test scenarios; fixed-coupling gradient vs central differences
Outcome outer_descent() {
  struct Case {
    std::string file;
    double eps;
  };
  const std::vector<Case> cases{{"replica.json", 0.5}, {"sweep.json", 0.1}, {"sweep.json", 2.5}, {"grouping.json", 0.5}};
  int probes = 0, bad_probes = 0, bad_mono = 0;
  double worst_rel = 0.0, worst_rise = -1e300;
  std::mt19937 rng(6);
  std::normal_distribution<double> g;
  for (const Case& c : cases) {
    const ScenarioConfig cfg = load_config(config_path(c.file));
    const Scenario ctx = cfg.scenario(0, c.eps);
    const OuterResult r = minimize_J(ctx, cfg.outer);
    const auto& it = r.history.iterates;
    for (std::size_t k = 1; k < it.size(); ++k) {
      worst_rise = std::max(worst_rise, it[k].J - it[k - 1].J);
      if (it[k].J > it[k - 1].J + 1e-9) ++bad_mono;
    }
    // probes at the final point and at a perturbed point, with the final coupling held fixed
    const Coupling& P = r.final.sdp.pair.P;
    for (int rep = 0; rep < 2; ++rep) {
      Eigen::MatrixXd X = r.xd.points;
      if (rep == 1)
        for (int e = 0; e < X.size(); ++e) X(e) += 0.5 * g(rng);
      const bool sq = cfg.cost == CostKind::squared_euclidean;
      auto cost_matrix = [&](const Eigen::MatrixXd& Z) {
        Eigen::MatrixXd C = oracle::sq_dist(Z);
        return sq ? C : Eigen::MatrixXd(C.cwiseSqrt());
      };
      auto F = [&](const Eigen::MatrixXd& Z) { return oracle::gw_sum(P.entries, cost_matrix(Z), ctx.reference.entries); };
      const Eigen::MatrixXd fd = oracle::central_diff(F, X, 1e-6);
      const PointCloud grad = fixed_coupling_gradient(PointCloud(X), P, ctx.reference, cfg.cost);
      for (int e = 0; e < X.size(); ++e, ++probes) {
        const double rel = std::abs(grad.points(e) - fd(e)) / std::max(1.0, std::abs(fd(e)));
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-5) ++bad_probes;
      }
    }
  }
  return {bad_mono == 0 && bad_probes == 0 && probes >= 100,
          fmt("%zu scenarios, max J rise %.3e, %d monotonicity violations; %d gradient probes, max rel err %.3e",
              cases.size(), worst_rise, bad_mono, probes, worst_rel)};
}

// 7. grouping: two single-linkage clusters of three, intra < inter, ratio within 20% of 2:4
Outcome grouping() {
  const ScenarioConfig cfg = load_config(config_path("grouping.json"));
  const ExperimentReport rep = grouping_experiment(cfg);
  const ClusterDiagnostics& d = rep.runs.at(0).cluster;
  const bool two_of_three = d.cluster_sizes == std::vector<int>{3, 3};
  const double rel = std::abs(d.ratio - d.configured_ratio) / d.configured_ratio;
  std::ostringstream sizes;
  for (int s : d.cluster_sizes) sizes << s << ' ';
  return {two_of_three && d.intra_mean < d.inter_mean && rel <= 0.2,
          fmt("cost %s, clusters [ %s], intra %.4f, inter %.4f, ratio %.4f vs configured %.4f (%.0f%% off)",
              d.cost.c_str(), sizes.str().c_str(), d.intra_mean, d.inter_mean, d.ratio, d.configured_ratio,
              100 * rel)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. two CLI runs give byte-identical CSVs and identical JSON outside the metadata field
Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "gwsteer_acceptance_c8";
  fs::remove_all(base);
  fs::create_directories(base);
  for (const char* tag : {"a", "b"}) {
    const std::string cmd = std::string(GWSTEER_CLI) + " run " + config_path("replica.json") + " --out " +
                            (base / tag).string() + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "cli run failed"};
  }
  std::vector<std::string> differ;
  for (const char* f : {"trajectories.csv", "sweep.csv", "certificates.csv"})
    if (slurp(base / "a" / f) != slurp(base / "b" / f) || slurp(base / "a" / f).empty()) differ.push_back(f);
  const std::string ja = slurp(base / "a" / "report.json"), jb = slurp(base / "b" / "report.json");
  nlohmann::json a = nlohmann::json::parse(ja), b = nlohmann::json::parse(jb);
  a.erase("metadata");
  b.erase("metadata");
  if (dump_json17(a) != dump_json17(b)) differ.push_back("report.json");
  std::string list;
  for (const auto& f : differ) list += " " + f;
  return {differ.empty(), differ.empty() ? "3 CSV files and report.json identical" : "differ:" + list};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"certificate replication", certificate_replication},
      {"trade-off trend", tradeoff_trend},
      {"GW oracle equivalence (N=2)", oracle_equivalence},
      {"zero-optimum exactness", zero_optimum},
      {"steering oracle", steering_oracle},
      {"outer descent", outer_descent},
      {"grouping experiment", grouping},
      {"determinism", determinism}};
  std::vector<int> which;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
    which.push_back(k);
  } else {
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) which.push_back(k);
  }
  bool all = true;
  for (int k : which) {
    Outcome o;
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("C%d %s: %s | %s\n", k, o.pass ? "PASS" : "FAIL", criteria[k - 1].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
