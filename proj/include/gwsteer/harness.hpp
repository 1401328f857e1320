#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "gwsteer/config.hpp"
#include "gwsteer/outer_opt.hpp"
#include "gwsteer/sdp_relax.hpp"
#include "gwsteer/steering.hpp"

namespace gwsteer {

struct ClusterDiagnostics {
  std::vector<int> assignment;  // agent -> graph node
  std::vector<int> label;       // agent -> group label of its node
  double intra_mean = 0.0;      // in the configured cost convention
  double inter_mean = 0.0;
  double ratio = 0.0;           // intra_mean / inter_mean
  double configured_ratio = 0.0;
  double threshold = 0.0;       // single-linkage cut, midpoint of the two weights
  std::vector<int> cluster_of;  // single-linkage component per agent
  std::vector<int> cluster_sizes;  // sorted ascending
  bool clusters_match_groups = false;
  std::string cost;
};

ClusterDiagnostics cluster_diagnostics(const PointCloud& xd, const Coupling& P, const GroupSpec& groups,
                                       CostKind cost);

struct HistoryEntry {
  double J = 0.0, rho = 0.0, gw = 0.0, ratio = 0.0, rank_gap = 0.0;
};

struct RunRecord {
  int run_id = 0;
  std::uint64_t seed = 0;
  double eps = 0.0;
  std::string status;  // converged | max_iters
  bool initial_projected = false;
  PointCloud x0, xd;
  Eigen::MatrixXd target;     // d x N; empty in graph mode
  MetricMatrix reference;
  Trajectory trajectory;
  double rho = 0.0, gw = 0.0, J = 0.0;
  Certificate certificate;
  Coupling P;                 // returned coupling
  LiftedPair relaxed;         // solver moment matrix, normalized
  std::string sdp_method;
  bool polished = false;
  std::vector<HistoryEntry> history;
  bool has_cluster = false;
  ClusterDiagnostics cluster;
  double wall_time = 0.0;     // seconds; exported only inside metadata
};

struct SweepRow {
  double eps = 0.0;
  bool ok = false;
  double control_cost = 0.0;
  double gw_distance = 0.0;
  double J = 0.0;
  std::string error;
  int error_class = 0;  // 2 infeasible, 3 numeric
};

struct ExperimentReport {
  std::string kind;  // run | sweep | group
  nlohmann::json config;
  std::vector<RunRecord> runs;
  std::vector<SweepRow> sweep;
  bool control_nonincreasing = true;
  bool gw_nondecreasing = true;
  bool extremes_strict = true;
  std::vector<std::string> warnings;
  nlohmann::json metadata = nlohmann::json::object();
};

RunRecord run_single(const ScenarioConfig& cfg, int run, double eps);
// One record per configured run; eps is the first (or only) entry of the config.
ExperimentReport run_experiment(const ScenarioConfig& cfg);
ExperimentReport sweep_epsilon(const ScenarioConfig& cfg, const std::vector<double>& eps_list);
ExperimentReport grouping_experiment(const ScenarioConfig& cfg);

}  // namespace gwsteer
