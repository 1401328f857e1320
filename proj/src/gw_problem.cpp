#include "gwsteer/gw_problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

Coupling::Coupling(Eigen::MatrixXd P) : entries(std::move(P)) {
  if (entries.rows() != entries.cols() || entries.rows() < 1)
    throw InputError("coupling must be a non-empty square matrix");
  if (!entries.allFinite()) throw InputError("coupling has non-finite entries");
  const int N = size();
  row_marginal = Eigen::VectorXd::Constant(N, 1.0 / N);
  col_marginal = Eigen::VectorXd::Constant(N, 1.0 / N);
}

Eigen::VectorXd Coupling::vec() const {
  return Eigen::Map<const Eigen::VectorXd>(entries.data(), entries.size());
}

Coupling Coupling::uniform(int N) {
  return Coupling(Eigen::MatrixXd::Constant(N, N, 1.0 / (double(N) * N)));
}

Coupling Coupling::scaled_permutation(const std::vector<int>& sigma) {
  const int N = static_cast<int>(sigma.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) P(i, sigma[i]) = 1.0 / N;
  return Coupling(P);
}

Coupling Coupling::from_vec(const Eigen::VectorXd& v, int N) {
  if (v.size() != N * N) throw InputError("vectorized coupling has wrong length");
  return Coupling(Eigen::Map<const Eigen::MatrixXd>(v.data(), N, N));
}

std::string to_string(GwMethod m) {
  switch (m) {
    case GwMethod::sdp: return "sdp";
    case GwMethod::oracle_grid: return "oracle_grid";
    case GwMethod::oracle_permutation: return "oracle_permutation";
    case GwMethod::local: return "local";
  }
  return "unknown";
}

double gw_objective(const Eigen::MatrixXd& P, const LossTensor& G) {
  const long n2 = P.size();
  if (G.entries.rows() != n2 || G.entries.cols() != n2) {
    std::ostringstream os;
    os << "loss tensor is " << G.entries.rows() << "x" << G.entries.cols()
       << " but coupling has " << n2 << " entries";
    throw InputError(os.str());
  }
  Eigen::Map<const Eigen::VectorXd> v(P.data(), n2);
  return v.dot(G.entries * v);
}

double gw_objective(const Coupling& P, const LossTensor& G) { return gw_objective(P.entries, G); }

CouplingReport validate_coupling(const Coupling& P) {
  CouplingReport r;
  const Eigen::MatrixXd& E = P.entries;
  if (E.size() == 0) return r;
  Eigen::VectorXd rows = E.rowwise().sum();
  Eigen::VectorXd cols = E.colwise().sum().transpose();
  r.max_marginal_violation = std::max((rows - P.row_marginal).cwiseAbs().maxCoeff(),
                                      (cols - P.col_marginal).cwiseAbs().maxCoeff());
  r.min_entry = E.minCoeff();
  r.total_mass = E.sum();
  r.pass = E.allFinite() && r.max_marginal_violation <= tol_feas && r.min_entry >= -tol_feas &&
           std::abs(r.total_mass - 1.0) <= tol_feas;
  return r;
}

GwValue oracle_gw(const LossTensor& G, int N, OracleMode mode, int resolution) {
  if (G.entries.rows() != N * N) throw InputError("loss tensor size does not match N");
  GwValue best;
  best.value = std::numeric_limits<double>::infinity();
  if (mode == OracleMode::grid) {
    if (N != 2) throw CapabilityError("grid oracle supports N = 2 only");
    if (resolution < 2) throw InputError("grid oracle needs resolution >= 2");
    best.method = GwMethod::oracle_grid;
    for (int k = 0; k < resolution; ++k) {
      double a = 0.5 * k / (resolution - 1);
      Eigen::MatrixXd P(2, 2);
      P << a, 0.5 - a, 0.5 - a, a;
      double v = gw_objective(P, G);
      if (v < best.value) {
        best.value = v;
        best.coupling = Coupling(P);
      }
    }
    return best;
  }
  if (N > 4) throw CapabilityError("permutation oracle supports N <= 4");
  best.method = GwMethod::oracle_permutation;
  std::vector<int> sigma(N);
  std::iota(sigma.begin(), sigma.end(), 0);
  do {
    Coupling P = Coupling::scaled_permutation(sigma);
    double v = gw_objective(P, G);
    if (v < best.value) {
      best.value = v;
      best.coupling = P;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return best;
}

GwValue local_gw(const LossTensor& G, const Coupling& P0, double step, int iters,
                 std::vector<double>* history) {
  if (!(step > 0.0)) throw InputError("local_gw step must be positive");
  const int N = P0.size();
  Eigen::MatrixXd P = P0.entries;
  double f = gw_objective(P, G);
  double t = step;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd g = 2.0 * (G.entries * Eigen::Map<const Eigen::VectorXd>(P.data(), P.size()));
    Eigen::MatrixXd grad = Eigen::Map<const Eigen::MatrixXd>(g.data(), N, N);
    bool moved = false;
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      Eigen::MatrixXd cand = project_to_couplings(P - t * grad).entries;
      if ((cand - P).norm() <= 1e-14) break;
      double fc = gw_objective(cand, G);
      if (fc < f) {
        P = cand;
        f = fc;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (history) history->push_back(f);
    t = std::min(step, 2.0 * t);
  }
  GwValue out;
  out.value = f;
  out.coupling = Coupling(P);
  out.method = GwMethod::local;
  return out;
}

namespace {

double marginal_violation(const Eigen::MatrixXd& X, double target) {
  double row = (X.rowwise().sum().array() - target).abs().maxCoeff();
  double col = (X.colwise().sum().array() - target).abs().maxCoeff();
  return std::max(row, col);
}

// Projection onto {X : X 1 = a 1, X^T 1 = a 1} for square X.
void project_affine_marginals(Eigen::MatrixXd& X, double a) {
  const int N = static_cast<int>(X.rows());
  Eigen::VectorXd r = X.rowwise().sum().array() - a;
  Eigen::VectorXd c = X.colwise().sum().transpose().array() - a;
  double s = r.sum();
  X -= (r / N) * Eigen::RowVectorXd::Ones(N);
  X -= Eigen::VectorXd::Ones(N) * (c.transpose() / N);
  X.array() += s / (double(N) * N);
}

}  // namespace

Coupling project_to_couplings(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols() || M.rows() < 1) throw InputError("projection needs a square matrix");
  if (!M.allFinite()) throw InputError("projection input has non-finite entries");
  const int N = static_cast<int>(M.rows());
  const double a = 1.0 / N;
  const int max_sweeps = 10000;
  Eigen::MatrixXd x = M;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(N, N);
  double viol = 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::MatrixXd y = x;
    project_affine_marginals(y, a);
    Eigen::MatrixXd xn = (y + q).cwiseMax(0.0);
    q = y + q - xn;
    double change = (xn - x).norm();
    x = std::move(xn);
    viol = marginal_violation(x, a);
    if (viol <= 1e-14 && change <= 1e-14) return Coupling(x);
    if (viol <= 1e-13 && change <= 1e-13 * (1.0 + x.norm()) && sweep > 2) return Coupling(x);
  }
  if (viol <= 0.01 * tol_feas) return Coupling(x);
  std::ostringstream os;
  os << "coupling projection did not converge after " << max_sweeps
     << " sweeps (marginal violation " << viol << ")";
  throw NumericError(os.str());
}

}  // namespace gwsteer
