#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "gwsteer/mmspace.hpp"
#include "gwsteer/outer_opt.hpp"
#include "gwsteer/steering.hpp"

namespace gwsteer {

// Counter-based generator: splitmix64 finalizer of seed + (counter+1)*0x9E3779B97F4A7C15,
// top 53 bits scaled to [0,1).
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter);
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

struct SamplerSpec {
  Eigen::VectorXd lower, upper;
};

// Coordinate a of point i uses counter i*d + a.
PointCloud sample_cloud(const SamplerSpec& spec, int N, std::uint64_t seed);

struct TargetSpec {
  std::string shape = "points";  // points | circle | line
  Eigen::MatrixXd points;        // d x N when shape == points
  double radius = 3.0;
  Eigen::VectorXd center;
  double phase = 0.0;
  double jitter = 0.0;  // angular jitter as a fraction of the spacing 2*pi/N
  std::uint64_t seed = 0;
  Eigen::VectorXd start, end;
};

PointCloud target_cloud(const TargetSpec& spec, int N, int d);

enum class MetricMode { euclidean_target, graph_groups };
std::string to_string(MetricMode m);

struct ScenarioConfig {
  LinearSystem system;
  int T = 10;
  int N = 0;
  int d = 0;
  Eigen::MatrixXd R;
  std::vector<double> eps_list;
  bool eps_is_list = false;
  Box state_box, control_box, terminal_box;
  bool explicit_initial = false;
  Eigen::MatrixXd initial_points;
  SamplerSpec sampler;
  bool has_target = false;
  TargetSpec target;
  MetricMode metric_mode = MetricMode::euclidean_target;
  CostKind cost = CostKind::squared_euclidean;
  GroupSpec groups;
  OuterConfig outer;
  std::uint64_t seed = 0;
  int runs = 1;

  // Initial cloud of run k (sampler seed = seed + k).
  PointCloud initial_cloud(int run) const;
  // Reference cost matrix: target pairwise costs or the graph metric.
  MetricMatrix reference(std::vector<std::string>* warnings = nullptr) const;
  Scenario scenario(int run, double eps) const;

  void validate() const;
  nlohmann::json echo() const;  // every field with defaults filled in
};

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

}  // namespace gwsteer
