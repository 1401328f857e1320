#include "gwsteer/mmspace.hpp"

#include <cmath>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::squared_euclidean: return "squared_euclidean";
    case CostKind::euclidean: return "euclidean";
    case CostKind::graph: return "graph";
  }
  return "unknown";
}

CostKind cost_kind_from_string(const std::string& name) {
  if (name == "squared_euclidean") return CostKind::squared_euclidean;
  if (name == "euclidean") return CostKind::euclidean;
  if (name == "graph") return CostKind::graph;
  throw InputError("unknown cost kind '" + name + "'");
}

PointCloud::PointCloud(Eigen::MatrixXd pts) : points(std::move(pts)) { validate(); }

void PointCloud::validate() const {
  if (points.cols() < 1 || points.rows() < 1)
    throw InputError("point cloud needs at least one point of positive dimension");
  if (!points.allFinite()) throw InputError("point cloud has non-finite coordinates");
}

void MetricMatrix::validate(double tol) const {
  if (entries.rows() != entries.cols()) throw InputError("metric matrix is not square");
  if (!entries.allFinite()) throw InputError("metric matrix has non-finite entries");
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  for (int i = 0; i < size(); ++i) {
    if (std::abs(entries(i, i)) > tol * scale) throw InputError("metric matrix diagonal is not zero");
    for (int j = 0; j < i; ++j) {
      if (std::abs(entries(i, j) - entries(j, i)) > tol * scale)
        throw InputError("metric matrix is not symmetric");
      if (entries(i, j) < -tol * scale) throw InputError("metric matrix has negative entries");
    }
  }
}

void GroupSpec::validate(int N) const {
  if (static_cast<int>(group_of.size()) != N) {
    std::ostringstream os;
    os << "group spec covers " << group_of.size() << " agents, expected " << N;
    throw InputError(os.str());
  }
  if (!(intra_weight > 0.0) || !(inter_weight > intra_weight) || !std::isfinite(inter_weight))
    throw InputError("group weights must satisfy 0 < intra_weight < inter_weight");
}

bool LossTensor::swap_symmetric(double tol) const {
  if (entries.rows() != entries.cols()) return false;
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  return (entries - entries.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

MetricMatrix pairwise_cost(const PointCloud& cloud, CostKind kind) {
  cloud.validate();
  if (kind == CostKind::graph)
    throw InputError("pairwise_cost supports squared_euclidean and euclidean only");
  const int N = cloud.size();
  MetricMatrix out;
  out.kind = kind;
  out.entries = Eigen::MatrixXd::Zero(N, N);
  for (int j = 0; j < N; ++j) {
    for (int i = j + 1; i < N; ++i) {
      double sq = (cloud.points.col(i) - cloud.points.col(j)).squaredNorm();
      double v = kind == CostKind::squared_euclidean ? sq : std::sqrt(sq);
      out.entries(i, j) = v;
      out.entries(j, i) = v;
    }
  }
  return out;
}

MetricMatrix graph_metric(const GroupSpec& spec, int N, std::vector<std::string>* warnings) {
  spec.validate(N);
  if (spec.inter_weight > 2.0 * spec.intra_weight && warnings)
    warnings->push_back("graph metric: inter_weight > 2*intra_weight violates the triangle inequality");
  MetricMatrix out;
  out.kind = CostKind::graph;
  out.entries = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (i != j)
        out.entries(i, j) = spec.group_of[i] == spec.group_of[j] ? spec.intra_weight : spec.inter_weight;
  return out;
}

LossTensor build_loss_tensor(const MetricMatrix& Cx, const MetricMatrix& Cy, LossKind kind) {
  Cx.validate(1e-9);
  Cy.validate(1e-9);
  if (Cx.size() != Cy.size()) {
    std::ostringstream os;
    os << "loss tensor needs equal sizes, got " << Cx.size() << " and " << Cy.size();
    throw InputError(os.str());
  }
  const int N = Cx.size();
  LossTensor G;
  G.kind = kind;
  G.n = G.m = N;
  G.entries.resize(N * N, N * N);
  for (int jp = 0; jp < N; ++jp)
    for (int ip = 0; ip < N; ++ip)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
          double diff = Cx.entries(i, ip) - Cy.entries(j, jp);
          G.entries(flat_index(i, j, N), flat_index(ip, jp, N)) = 0.5 * diff * diff;
        }
  return G;
}

}  // namespace gwsteer
