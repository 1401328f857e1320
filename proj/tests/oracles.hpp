#pragma once

// Independent reference computations used only by the tests.  Nothing here calls into the
// library's solvers or tensor builders.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// sum_{i,j,i',j'} 1/2 (Cx(i,i') - Cy(j,j'))^2 P(i,j) P(i',j')
inline double gw_sum(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Cx, const Eigen::MatrixXd& Cy) {
  const int N = static_cast<int>(P.rows());
  double s = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < N; ++l) {
          const double d = Cx(i, k) - Cy(j, l);
          s += 0.5 * d * d * P(i, j) * P(k, l);
        }
  return s;
}

inline Eigen::MatrixXd segment_coupling(double a) {
  Eigen::MatrixXd P(2, 2);
  P << a, 0.5 - a, 0.5 - a, a;
  return P;
}

// exhaustive scan of the 2x2 coupling segment
inline std::pair<double, double> grid_min(const Eigen::MatrixXd& Cx, const Eigen::MatrixXd& Cy, int res = 100001) {
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (int k = 0; k < res; ++k) {
    const double a = 0.5 * k / (res - 1);
    const double v = gw_sum(segment_coupling(a), Cx, Cy);
    if (v < best) {
      best = v;
      arg = a;
    }
  }
  return {best, arg};
}

inline double perm_min(const Eigen::MatrixXd& Cx, const Eigen::MatrixXd& Cy) {
  const int N = static_cast<int>(Cx.rows());
  std::vector<int> s(N);
  std::iota(s.begin(), s.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) P(i, s[i]) = 1.0 / N;
    best = std::min(best, gw_sum(P, Cx, Cy));
  } while (std::next_permutation(s.begin(), s.end()));
  return best;
}

inline Eigen::MatrixXd sq_dist(const Eigen::MatrixXd& pts) {
  const int N = static_cast<int>(pts.cols());
  Eigen::MatrixXd C(N, N);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) C(i, k) = (pts.col(i) - pts.col(k)).squaredNorm();
  return C;
}

inline Eigen::MatrixXd rotation2(double th) {
  Eigen::MatrixXd R(2, 2);
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return R;
}

// central differences of f at x, step h
inline Eigen::MatrixXd central_diff(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& x,
                                    double h) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (int k = 0; k < x.size(); ++k) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

// Minimum energy by the KKT system of  min sum_t u_t' R u_t  s.t.  x_T = xd  (controls stacked
// by time), solved densely without forming the Gramian.
inline double kkt_min_energy(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int T, const Eigen::MatrixXd& R,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& xd, Eigen::MatrixXd* U = nullptr) {
  const int d = static_cast<int>(A.rows()), m = static_cast<int>(B.cols());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, T * m);  // x_T = A^T x0 + M u
  Eigen::MatrixXd Ak = Eigen::MatrixXd::Identity(d, d);
  for (int t = T - 1; t >= 0; --t) {
    M.block(0, t * m, d, m) = Ak * B;
    Ak = Ak * A;
  }
  const Eigen::VectorXd r = xd - Ak * x0;
  const int n = T * m;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + d, n + d);
  for (int t = 0; t < T; ++t) K.block(t * m, t * m, m, m) = 2 * R;
  K.topRightCorner(n, d) = M.transpose();
  K.bottomLeftCorner(d, n) = M;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + d);
  rhs.tail(d) = r;
  const Eigen::VectorXd z = K.fullPivLu().solve(rhs);
  double cost = 0.0;
  for (int t = 0; t < T; ++t) cost += z.segment(t * m, m).dot(R * z.segment(t * m, m));
  if (U) {
    U->resize(m, T);
    for (int t = 0; t < T; ++t) U->col(t) = z.segment(t * m, m);
  }
  return cost;
}

}  // namespace oracle
