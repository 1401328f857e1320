// Primal-dual interior point method with Nesterov-Todd scaling and Mehrotra correction,
// infeasible start, dense normal equations.  Handles a convex quadratic objective.
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gwsteer/conic.hpp"
#include "gwsteer/errors.hpp"

namespace gwsteer::detail {
namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using SpRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Layout {
  int l = 0;
  std::vector<int> order;
  std::vector<int> offset;
  int dim = 0;
  int degree = 0;
};

// Scaled point lambda and the NT scaling matrices: W z = R' Z R, W^{-T} s = Rinv S Rinv'.
struct Scaling {
  Vec w;
  Vec lam_l;
  std::vector<Mat> R, Rinv, T;
  std::vector<Vec> lam;
};

Vec identity_element(const Layout& L) {
  Vec e = Vec::Zero(L.dim);
  e.head(L.l).setOnes();
  for (size_t b = 0; b < L.order.size(); ++b)
    for (int j = 0; j < L.order[b]; ++j) e(L.offset[b] + svec_index(j, j, L.order[b])) = 1.0;
  return e;
}

// Smallest t with v + t e in the cone interior boundary, i.e. -min eigenvalue.
double neg_min_eig(const Layout& L, const Vec& v) {
  double t = -std::numeric_limits<double>::infinity();
  if (L.l > 0) t = -v.head(L.l).minCoeff();
  for (size_t b = 0; b < L.order.size(); ++b) {
    const int k = L.order[b];
    t = std::max(t, -min_eigenvalue(smat(v.segment(L.offset[b], svec_dim(k)), k)));
  }
  return t;
}

bool compute_scaling(const Layout& L, const Vec& s, const Vec& z, Scaling& W) {
  if (L.l > 0) {
    auto sl = s.head(L.l).array();
    auto zl = z.head(L.l).array();
    if ((sl <= 0).any() || (zl <= 0).any()) return false;
    W.w = (sl / zl).sqrt();
    W.lam_l = (sl * zl).sqrt();
  }
  const size_t nb = L.order.size();
  W.R.resize(nb);
  W.Rinv.resize(nb);
  W.T.resize(nb);
  W.lam.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    const int k = L.order[b];
    Mat S = smat(s.segment(L.offset[b], svec_dim(k)), k);
    Mat Z = smat(z.segment(L.offset[b], svec_dim(k)), k);
    Eigen::LLT<Mat> c1(S), c2(Z);
    if (c1.info() != Eigen::Success || c2.info() != Eigen::Success) return false;
    Mat L1 = c1.matrixL();
    Mat L2 = c2.matrixL();
    Eigen::JacobiSVD<Mat> svd(L2.transpose() * L1, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec sig = svd.singularValues();
    if (sig.minCoeff() <= 0.0 || !sig.allFinite()) return false;
    Vec isq = sig.cwiseSqrt().cwiseInverse();
    W.R[b] = L1 * svd.matrixV() * isq.asDiagonal();
    W.Rinv[b] = (L2 * svd.matrixU() * isq.asDiagonal()).transpose();
    W.T[b] = W.Rinv[b].transpose() * W.Rinv[b];
    W.lam[b] = sig;
  }
  return true;
}

enum class Op { W, WinvT, WT, H, Hinv };

Vec apply(const Layout& L, const Scaling& W, Op op, const Vec& v) {
  Vec out(v.size());
  if (L.l > 0) {
    auto vl = v.head(L.l).array();
    switch (op) {
      case Op::W: case Op::WT: out.head(L.l) = vl * W.w.array(); break;
      case Op::WinvT: out.head(L.l) = vl / W.w.array(); break;
      case Op::H: out.head(L.l) = vl * W.w.array().square(); break;
      case Op::Hinv: out.head(L.l) = vl / W.w.array().square(); break;
    }
  }
  for (size_t b = 0; b < L.order.size(); ++b) {
    const int k = L.order[b];
    Mat V = smat(v.segment(L.offset[b], svec_dim(k)), k);
    Mat M;
    switch (op) {
      case Op::W: M = W.R[b].transpose() * V * W.R[b]; break;
      case Op::WinvT: M = W.Rinv[b] * V * W.Rinv[b].transpose(); break;
      case Op::WT: M = W.R[b] * V * W.R[b].transpose(); break;
      case Op::H: {
        Mat RR = W.R[b] * W.R[b].transpose();
        M = RR * V * RR;
        break;
      }
      case Op::Hinv: M = W.T[b] * V * W.T[b]; break;
    }
    out.segment(L.offset[b], svec_dim(k)) = svec(M);
  }
  return out;
}

// lambda o v (div=false) or its inverse lambda \ v (div=true).
Vec lam_prod(const Layout& L, const Scaling& W, const Vec& v, bool div) {
  Vec out(v.size());
  if (L.l > 0)
    out.head(L.l) = div ? Vec(v.head(L.l).array() / W.lam_l.array()) : Vec(v.head(L.l).array() * W.lam_l.array());
  for (size_t b = 0; b < L.order.size(); ++b) {
    const int k = L.order[b];
    int idx = L.offset[b];
    for (int j = 0; j < k; ++j)
      for (int i = j; i < k; ++i, ++idx) {
        double f = 0.5 * (W.lam[b](i) + W.lam[b](j));
        out(idx) = div ? v(idx) / f : v(idx) * f;
      }
  }
  return out;
}

Vec jordan(const Layout& L, const Vec& u, const Vec& v) {
  Vec out(u.size());
  if (L.l > 0) out.head(L.l) = u.head(L.l).cwiseProduct(v.head(L.l));
  for (size_t b = 0; b < L.order.size(); ++b) {
    const int k = L.order[b];
    Mat U = smat(u.segment(L.offset[b], svec_dim(k)), k);
    Mat V = smat(v.segment(L.offset[b], svec_dim(k)), k);
    out.segment(L.offset[b], svec_dim(k)) = svec(0.5 * (U * V + V * U));
  }
  return out;
}

// Largest alpha with lambda + alpha * d in the cone (infinity if unbounded).
double max_step(const Layout& L, const Scaling& W, const Vec& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < L.l; ++i)
    if (d(i) < 0) alpha = std::min(alpha, -W.lam_l(i) / d(i));
  for (size_t b = 0; b < L.order.size(); ++b) {
    const int k = L.order[b];
    Vec isq = W.lam[b].cwiseSqrt().cwiseInverse();
    Mat D = isq.asDiagonal() * smat(d.segment(L.offset[b], svec_dim(k)), k) * isq.asDiagonal();
    double m = min_eigenvalue(D);
    if (m < 0) alpha = std::min(alpha, -1.0 / m);
  }
  return alpha;
}

// Matrix of v -> T V T in svec coordinates.
Mat sym_kron(const Mat& T) {
  const int k = static_cast<int>(T.rows());
  const int sd = svec_dim(k);
  Mat M(sd, sd);
  int r = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i, ++r) {
      const double si = i == j ? 1.0 : M_SQRT2;
      int c = 0;
      for (int q = 0; q < k; ++q)
        for (int p = q; p < k; ++p, ++c) {
          if (p == q) M(r, c) = si * T(i, p) * T(j, p);
          else M(r, c) = si * M_SQRT1_2 * (T(i, p) * T(j, q) + T(i, q) * T(j, p));
        }
    }
  return M;
}

class KktSystem {
 public:
  KktSystem(const Mat& P, const Mat& Aeq, const SpRow& G, const Layout& L)
      : P_(P), A_(Aeq), G_(G), L_(L) {}

  bool factor(const Scaling& W) {
    W_ = &W;
    const int n = static_cast<int>(P_.rows());
    Mat K = P_;
    if (L_.l > 0) {
      SpRow Gl = G_.topRows(L_.l);
      Vec d = W.w.array().square().inverse();
      SpMat DGl = d.asDiagonal() * Gl;
      K += Mat(SpMat(Gl.transpose()) * DGl);
    }
    for (size_t b = 0; b < L_.order.size(); ++b) {
      const int sd = svec_dim(L_.order[b]);
      SpRow Gb = G_.middleRows(L_.offset[b], sd);
      Mat HG = sym_kron(W.T[b]) * Gb;
      K += SpMat(Gb.transpose()) * HG;
    }
    K = 0.5 * (K + K.transpose());
    double scale = std::max(1.0, K.diagonal().cwiseAbs().maxCoeff());
    double delta = 1e-13 * scale;
    for (int attempt = 0; attempt < 12; ++attempt, delta *= 10.0) {
      llt_.compute(K + delta * Mat::Identity(n, n));
      if (llt_.info() == Eigen::Success) break;
    }
    if (llt_.info() != Eigen::Success) return false;
    if (A_.rows() > 0) {
      KinvAt_ = llt_.solve(A_.transpose());
      Mat S = A_ * KinvAt_;
      S = 0.5 * (S + S.transpose());
      double ss = std::max(1e-300, S.diagonal().cwiseAbs().maxCoeff());
      schur_.compute(S + 1e-14 * ss * Mat::Identity(S.rows(), S.rows()));
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Solves [P A' G'; A 0 0; G 0 -H] [dx; dy; dz] = [bx; by; bz] with refinement.
  void solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& dx, Vec& dy, Vec& dz) const {
    raw_solve(bx, by, bz, dx, dy, dz);
    for (int round = 0; round < 2; ++round) {
      Vec e1 = bx - (P_ * dx + A_.transpose() * dy + G_.transpose() * dz);
      Vec e2 = by - A_ * dx;
      Vec e3 = bz - (G_ * dx - apply(L_, *W_, Op::H, dz));
      Vec cx, cy, cz;
      raw_solve(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  void raw_solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& dx, Vec& dy, Vec& dz) const {
    Vec rx = bx + G_.transpose() * apply(L_, *W_, Op::Hinv, bz);
    if (A_.rows() > 0) {
      dy = schur_.solve(KinvAt_.transpose() * rx - by);
      dx = llt_.solve(rx - A_.transpose() * dy);
    } else {
      dy = Vec::Zero(0);
      dx = llt_.solve(rx);
    }
    dz = apply(L_, *W_, Op::Hinv, G_ * dx - bz);
  }

  const Mat& P_;
  const Mat& A_;
  const SpRow& G_;
  const Layout& L_;
  const Scaling* W_ = nullptr;
  Eigen::LLT<Mat> llt_;
  Eigen::LLT<Mat> schur_;
  Mat KinvAt_;
};

}  // namespace

ConicSolution solve_interior_point(const ConicProgram& prog, double tol, int max_iter) {
  const int n = prog.num_vars;
  ConicSolution sol;
  sol.method = "interior_point";

  // Split rows into equalities (zero cones) and cone inequalities.
  std::vector<int> zero_rows, cone_rows;
  Layout L;
  {
    int off = 0;
    for (const Cone& k : prog.cones) {
      if (k.kind == ConeKind::zero)
        for (int i = 0; i < k.rows(); ++i) zero_rows.push_back(off + i);
      else if (k.kind == ConeKind::nonneg)
        for (int i = 0; i < k.rows(); ++i) cone_rows.push_back(off + i);
      off += k.rows();
    }
    L.l = static_cast<int>(cone_rows.size());
    off = 0;
    int pos = L.l;
    for (const Cone& k : prog.cones) {
      if (k.kind == ConeKind::psd) {
        L.order.push_back(k.dim);
        L.offset.push_back(pos);
        for (int i = 0; i < k.rows(); ++i) cone_rows.push_back(off + i);
        pos += k.rows();
      }
      off += k.rows();
    }
    L.dim = pos;
    L.degree = L.l;
    for (int k : L.order) L.degree += k;
  }

  SpRow Arow = prog.A;
  auto gather = [&](const std::vector<int>& rows) {
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t r = 0; r < rows.size(); ++r)
      for (SpRow::InnerIterator it(Arow, rows[r]); it; ++it) trip.emplace_back(int(r), it.col(), it.value());
    SpRow M(static_cast<int>(rows.size()), n);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  };
  SpRow G = gather(cone_rows);
  Vec h(cone_rows.size());
  for (size_t r = 0; r < cone_rows.size(); ++r) h(r) = prog.b(cone_rows[r]);

  // Drop linearly dependent equality rows; an inconsistent system is primal infeasible.
  Mat Aeq;
  Vec beq;
  std::vector<int> kept;
  if (!zero_rows.empty()) {
    Mat Afull = Mat(gather(zero_rows));
    Vec bfull(zero_rows.size());
    for (size_t r = 0; r < zero_rows.size(); ++r) bfull(r) = prog.b(zero_rows[r]);
    Eigen::ColPivHouseholderQR<Mat> qr(Afull.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    for (int i = 0; i < rank; ++i) kept.push_back(qr.colsPermutation().indices()(i));
    std::sort(kept.begin(), kept.end());
    Aeq.resize(rank, n);
    beq.resize(rank);
    for (int i = 0; i < rank; ++i) {
      Aeq.row(i) = Afull.row(kept[i]);
      beq(i) = bfull(kept[i]);
    }
    if (rank < Afull.rows()) {
      Vec xls = Aeq.transpose() * (Aeq * Aeq.transpose()).ldlt().solve(beq);
      double mismatch = (Afull * xls - bfull).cwiseAbs().maxCoeff();
      if (mismatch > 1e-9 * std::max(1.0, bfull.cwiseAbs().maxCoeff())) {
        sol.status = SolveStatus::infeasible;
        sol.x = Vec::Zero(n);
        sol.y = Vec::Zero(prog.num_rows());
        return sol;
      }
    }
  } else {
    Aeq.resize(0, n);
    beq.resize(0);
  }

  Mat Pd = prog.has_quadratic() ? Mat(prog.P) : Mat::Zero(n, n);
  Pd = 0.5 * (Pd + Pd.transpose());
  const Vec& c = prog.c;
  const Vec e = identity_element(L);

  auto assemble = [&](const Vec& x, const Vec& y, const Vec& z) {
    ConicSolution out;
    out.method = "interior_point";
    out.x = x;
    out.y = Vec::Zero(prog.num_rows());
    for (size_t i = 0; i < kept.size(); ++i) out.y(zero_rows[kept[i]]) = y(i);
    for (size_t r = 0; r < cone_rows.size(); ++r) out.y(cone_rows[r]) = z(r);
    out.objective = 0.5 * x.dot(Pd * x) + c.dot(x);
    return out;
  };

  KktSystem kkt(Pd, Aeq, G, L);
  Scaling W;
  W.w = Vec::Ones(L.l);
  W.lam_l = Vec::Ones(L.l);
  for (int k : L.order) {
    W.R.push_back(Mat::Identity(k, k));
    W.Rinv.push_back(Mat::Identity(k, k));
    W.T.push_back(Mat::Identity(k, k));
    W.lam.push_back(Vec::Ones(k));
  }
  if (!kkt.factor(W)) {
    sol = assemble(Vec::Zero(n), Vec::Zero(Aeq.rows()), Vec::Zero(L.dim));
    sol.status = SolveStatus::numerical;
    return sol;
  }
  Vec x, y, z, s;
  kkt.solve(-c, beq, h, x, y, z);
  s = -z;
  {
    double ts = neg_min_eig(L, s);
    if (L.dim > 0 && ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
    double tz = neg_min_eig(L, z);
    if (L.dim > 0 && tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
  }

  const double resx0 = std::max(1.0, c.norm());
  const double resy0 = std::max(1.0, beq.norm());
  const double resz0 = std::max(1.0, h.norm());
  // audited residuals are evaluated once the internal ones are within a factor of tol
  const double near_tol = 10.0 * tol;
  ConicSolution best;
  double best_merit = std::numeric_limits<double>::infinity();

  bool failed = false;
  for (int it = 0; it <= max_iter; ++it) {
    Vec Px = Pd * x;
    Vec rx = Px + Aeq.transpose() * y + G.transpose() * z + c;
    Vec ry = Aeq * x - beq;
    Vec rz = G * x + s - h;
    double gap = s.dot(z);
    double pcost = 0.5 * x.dot(Px) + c.dot(x);
    double dcost = pcost + y.dot(ry) + z.dot(rz) - gap;
    double pres = std::max(ry.size() ? ry.norm() / resy0 : 0.0, rz.size() ? rz.norm() / resz0 : 0.0);
    double dres = rx.norm() / resx0;
    double relgap = gap / std::max({1.0, std::abs(pcost), std::abs(dcost)});

    ConicSolution cur = assemble(x, y, z);
    cur.iterations = it;
    const double internal = std::max({pres, dres, relgap});
    if (internal <= near_tol) {
      ResidualReport rep = kkt_residuals(prog, cur);
      cur.residuals = rep.relative;
      double merit = std::max({rep.relative.primal_feas, rep.relative.dual_feas, rep.relative.gap});
      if (merit < best_merit) {
        best = cur;
        best_merit = merit;
      }
      if (merit <= tol) {
        cur.status = SolveStatus::optimal;
        return cur;
      }
    }

    // Infeasibility certificates from the current iterate direction.
    if (it >= 5) {
      double val = -(beq.dot(y) + h.dot(z));
      if (val > 0 && pres > tol) {
        double res = (Aeq.transpose() * y + G.transpose() * z).norm() / val;
        if (res <= tol) {
          cur.status = SolveStatus::infeasible;
          cur.residuals = kkt_residuals(prog, cur).relative;
          return cur;
        }
      }
      double cx = c.dot(x);
      if (cx < 0 && dres > tol) {
        double res = std::max(Px.norm(), (Aeq * x).norm()) / -cx;
        if (res <= tol && neg_min_eig(L, -(G * x)) <= tol * -cx) {
          cur.status = SolveStatus::unbounded;
          cur.residuals = kkt_residuals(prog, cur).relative;
          return cur;
        }
      }
    }
    if (it == max_iter) break;
    // late iterations on degenerate problems can lose accuracy; keep the best audited point
    if (best_merit < 100.0 * tol && internal > 1e3 * best_merit) {
      failed = true;
      break;
    }

    if (!compute_scaling(L, s, z, W) || !kkt.factor(W)) {
      failed = true;
      break;
    }
    const double mu = L.degree > 0 ? gap / L.degree : 0.0;

    // lambda o lambda
    Vec lam(L.dim);
    if (L.l > 0) lam.head(L.l) = W.lam_l;
    for (size_t b = 0; b < L.order.size(); ++b) {
      Mat D = W.lam[b].asDiagonal();
      lam.segment(L.offset[b], svec_dim(L.order[b])) = svec(D);
    }
    Vec lamsq = jordan(L, lam, lam);

    Vec dx, dy, dz, ds_scaled, dz_scaled;
    auto direction = [&](const Vec& rhs_c) {
      Vec u = lam_prod(L, W, rhs_c, true);  // W dz + W^{-T} ds = u
      Vec bz = -rz - apply(L, W, Op::WT, u);
      kkt.solve(-rx, -ry, bz, dx, dy, dz);
      dz_scaled = apply(L, W, Op::W, dz);
      ds_scaled = u - dz_scaled;
    };

    direction(-lamsq);
    double a_aff = std::min({1.0, max_step(L, W, ds_scaled), max_step(L, W, dz_scaled)});
    double sigma = std::pow(std::clamp(1.0 - a_aff, 0.0, 1.0), 3);
    Vec rhs = -lamsq - jordan(L, ds_scaled, dz_scaled) + sigma * mu * e;
    direction(rhs);
    double amax = std::min(max_step(L, W, ds_scaled), max_step(L, W, dz_scaled));
    double alpha = std::min(1.0, 0.99 * amax);
    if (!(alpha > 1e-14) || !dx.allFinite() || !dz.allFinite()) {
      failed = true;
      break;
    }

    Vec ds = apply(L, W, Op::WT, ds_scaled);
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }

  const SolveStatus status = failed ? SolveStatus::numerical : SolveStatus::max_iter;
  if (best.x.size() == n) {
    best.status = status;
    return best;
  }
  ConicSolution last = assemble(x, y, z);
  last.residuals = kkt_residuals(prog, last).relative;
  last.status = status;
  last.iterations = max_iter;
  return last;
}

}  // namespace gwsteer::detail
