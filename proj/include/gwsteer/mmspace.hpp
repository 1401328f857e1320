#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gwsteer {

enum class CostKind { squared_euclidean, euclidean, graph };
enum class LossKind { quadratic };

std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

// Points are stored column-wise: points.col(i) is agent i.
struct PointCloud {
  Eigen::MatrixXd points;

  PointCloud() = default;
  explicit PointCloud(Eigen::MatrixXd pts);

  int size() const { return static_cast<int>(points.cols()); }
  int dim() const { return static_cast<int>(points.rows()); }
  Eigen::VectorXd point(int i) const { return points.col(i); }
  void validate() const;
};

struct MetricMatrix {
  Eigen::MatrixXd entries;
  CostKind kind = CostKind::squared_euclidean;

  int size() const { return static_cast<int>(entries.rows()); }
  void validate(double tol = 1e-12) const;
};

struct GroupSpec {
  std::vector<int> group_of;
  double intra_weight = 1.0;
  double inter_weight = 2.0;

  void validate(int N) const;
};

// entries((i,j),(i',j')) with the flattened index i + j*N (column-major vec of P).
struct LossTensor {
  Eigen::MatrixXd entries;
  LossKind kind = LossKind::quadratic;
  int n = 0;
  int m = 0;

  int N() const { return n; }
  bool swap_symmetric(double tol = 1e-12) const;
};

inline int flat_index(int i, int j, int N) { return i + j * N; }

MetricMatrix pairwise_cost(const PointCloud& cloud, CostKind kind);

// Warnings (e.g. triangle inequality failure) are appended to `warnings` when given.
MetricMatrix graph_metric(const GroupSpec& spec, int N,
                          std::vector<std::string>* warnings = nullptr);

LossTensor build_loss_tensor(const MetricMatrix& Cx, const MetricMatrix& Cy,
                             LossKind kind = LossKind::quadratic);

}  // namespace gwsteer
