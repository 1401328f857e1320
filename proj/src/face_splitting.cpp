// ADMM on a face of the PSD cone: X = V R V' with R >= 0, split against an entrywise-bounded
// copy Y carrying the nonnegativity and fixed-entry rows.  Every other equality row must be
// implied by the face and the fixed entries; this is verified before iterating.
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gwsteer/conic.hpp"
#include "gwsteer/errors.hpp"

namespace gwsteer::detail {
namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using SpRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct EntryBounds {
  Vec lo, hi;  // bounds on the matrix entries Y(i, j), indexed by svec position
};

// V' smat(e_idx) V for svec position idx of an order-k matrix.
void add_unit_congruence(const Mat& V, int i, int j, double coef, Mat& F) {
  if (i == j) {
    F.noalias() += coef * V.row(i).transpose() * V.row(i);
  } else {
    Mat outer = V.row(i).transpose() * V.row(j);
    F.noalias() += coef * M_SQRT1_2 * (outer + outer.transpose());
  }
}

}  // namespace

ConicSolution solve_face_splitting(const ConicProgram& prog, double tol, int max_iter) {
  auto unsupported = [](const std::string& msg) { throw CapabilityError("face_splitting: " + msg); };
  if (prog.has_quadratic()) unsupported("quadratic objectives are not supported");
  int psd_count = 0, psd_offset = 0, k = 0;
  {
    int off = 0;
    for (const Cone& cone : prog.cones) {
      if (cone.kind == ConeKind::psd) {
        ++psd_count;
        psd_offset = off;
        k = cone.dim;
      }
      off += cone.rows();
    }
  }
  if (psd_count != 1) unsupported("exactly one PSD cone is required");
  if (prog.psd_faces.empty() || prog.psd_faces[0].size() == 0) unsupported("the PSD cone needs a face hint");
  const Mat& V = prog.psd_faces[0];
  const int n = prog.num_vars;
  const int sd = svec_dim(k);
  if (n != sd) unsupported("variables must be exactly the svec of the PSD block");

  // Positions (i, j) of each svec index.
  std::vector<std::pair<int, int>> pos(sd);
  for (int j = 0, idx = 0; j < k; ++j)
    for (int i = j; i < k; ++i, ++idx) pos[idx] = {i, j};

  SpRow A = prog.A;
  EntryBounds bnd;
  bnd.lo = Vec::Constant(sd, -std::numeric_limits<double>::infinity());
  bnd.hi = Vec::Constant(sd, std::numeric_limits<double>::infinity());
  std::vector<int> fixed_row(sd, -1);
  struct BoundRow { int row; int var; double coef; };
  std::vector<BoundRow> bound_rows;
  std::vector<int> zero_rows, implied_rows;

  int off = 0;
  for (const Cone& cone : prog.cones) {
    for (int r = off; r < off + cone.rows(); ++r) {
      int nnz = 0, var = -1;
      double coef = 0.0;
      for (SpRow::InnerIterator it(A, r); it; ++it)
        if (it.value() != 0.0) {
          ++nnz;
          var = it.col();
          coef = it.value();
        }
      if (cone.kind == ConeKind::psd) {
        if (nnz != 1 || var != r - off || coef != -1.0 || prog.b(r) != 0.0)
          unsupported("PSD rows must read s = x");
        continue;
      }
      if (nnz == 0) {
        if ((cone.kind == ConeKind::zero && prog.b(r) != 0.0) || (cone.kind == ConeKind::nonneg && prog.b(r) < 0.0))
          unsupported("empty row with infeasible right-hand side");
        continue;
      }
      const double scale = pos[var].first == pos[var].second ? 1.0 : M_SQRT2;
      if (cone.kind == ConeKind::nonneg) {
        if (nnz != 1) unsupported("nonnegative rows must bound a single variable");
        double bound = prog.b(r) / coef / scale;
        if (coef < 0) bnd.lo(var) = std::max(bnd.lo(var), bound);
        else bnd.hi(var) = std::min(bnd.hi(var), bound);
        bound_rows.push_back({r, var, coef});
      } else {
        zero_rows.push_back(r);
        if (nnz == 1) {
          double value = prog.b(r) / coef / scale;
          if (fixed_row[var] >= 0 && std::abs(bnd.lo(var) - value) > 1e-12 * (1.0 + std::abs(value)))
            unsupported("conflicting fixed entries");
          fixed_row[var] = r;
          bnd.lo(var) = bnd.hi(var) = value;
        } else {
          implied_rows.push_back(r);
        }
      }
    }
    off += cone.rows();
  }
  for (int v = 0; v < sd; ++v)
    if (bnd.lo(v) > bnd.hi(v) + 1e-12) unsupported("empty entry bounds");

  // Each multi-entry equality must be a combination of fixed-entry functionals on the face.
  const int r = static_cast<int>(V.cols());
  std::vector<int> fixed_vars;
  for (int v = 0; v < sd; ++v)
    if (fixed_row[v] >= 0) fixed_vars.push_back(v);
  std::vector<Mat> Ff;
  for (int v : fixed_vars) {
    Mat F = Mat::Zero(r, r);
    add_unit_congruence(V, pos[v].first, pos[v].second, 1.0, F);
    Ff.push_back(F);
  }
  const int nf = static_cast<int>(Ff.size());
  Mat gram(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b2 = 0; b2 < nf; ++b2) gram(a, b2) = (Ff[a].array() * Ff[b2].array()).sum();
  Eigen::CompleteOrthogonalDecomposition<Mat> gram_solver(gram);
  for (int row : implied_rows) {
    Mat F = Mat::Zero(r, r);
    for (SpRow::InnerIterator it(A, row); it; ++it)
      add_unit_congruence(V, pos[it.col()].first, pos[it.col()].second, it.value(), F);
    Vec rhs(nf);
    for (int a = 0; a < nf; ++a) rhs(a) = (Ff[a].array() * F.array()).sum();
    Vec coef = nf > 0 ? Vec(gram_solver.solve(rhs)) : Vec();
    Mat resid = F;
    double implied_b = 0.0;
    for (int a = 0; a < nf; ++a) {
      resid -= coef(a) * Ff[a];
      const int v = fixed_vars[a];
      const double scale = pos[v].first == pos[v].second ? 1.0 : M_SQRT2;
      implied_b += coef(a) * bnd.lo(v) * scale;
    }
    if (resid.norm() > 1e-9 * (1.0 + F.norm()) ||
        std::abs(implied_b - prog.b(row)) > 1e-9 * (1.0 + std::abs(prog.b(row)))) {
      std::ostringstream os;
      os << "equality row " << row << " is not implied by the face and the fixed entries";
      unsupported(os.str());
    }
  }

  // Scaled objective.
  const Mat C = smat(prog.c, k);
  const double cmax = C.cwiseAbs().maxCoeff();
  const double cscale = cmax > 0.0 ? cmax : 1.0;
  const Mat Cs = C / cscale;
  const double cnorm = Cs.norm();

  auto project_bounds = [&](const Mat& M) {
    Mat Y(k, k);
    for (int idx = 0; idx < sd; ++idx) {
      auto [i, j] = pos[idx];
      double v = std::clamp(M(i, j), bnd.lo(idx), bnd.hi(idx));
      Y(i, j) = v;
      Y(j, i) = v;
    }
    return Y;
  };

  // Standard-form solution with duals recovered from the splitting multiplier.
  SpMat Az;
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t q = 0; q < zero_rows.size(); ++q)
      for (SpRow::InnerIterator it(A, zero_rows[q]); it; ++it) trip.emplace_back(it.col(), int(q), it.value());
    Az.resize(n, static_cast<int>(zero_rows.size()));
    Az.setFromTriplets(trip.begin(), trip.end());
  }
  auto assemble = [&](const Mat& X, const Mat& Z) {
    ConicSolution out;
    out.method = "face_splitting";
    out.x = svec(X);
    out.objective = prog.c.dot(out.x);
    out.y = Vec::Zero(prog.num_rows());
    const Mat Zt = cscale * Z;
    Mat S = -(V.transpose() * Zt * V);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    Mat Sp = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Vec ypsd = svec(V * Sp * V.transpose());
    out.y.segment(psd_offset, sd) = ypsd;
    Vec czs = prog.c + svec(Zt);
    Vec rem = prog.c - ypsd;
    std::vector<char> used(sd, 0);
    for (const BoundRow& br : bound_rows) {
      if (used[br.var]) continue;
      double val = br.coef < 0 ? std::max(0.0, czs(br.var)) / -br.coef : std::max(0.0, -czs(br.var)) / br.coef;
      if (val == 0.0) continue;
      used[br.var] = 1;
      out.y(br.row) = val;
      rem(br.var) += br.coef * val;
    }
    if (!zero_rows.empty()) {
      Eigen::LeastSquaresConjugateGradient<SpMat> lscg;
      lscg.setTolerance(1e-14);
      lscg.setMaxIterations(20000);
      lscg.compute(Az);
      Vec yz = lscg.solve(-rem);
      for (size_t q = 0; q < zero_rows.size(); ++q) out.y(zero_rows[q]) = yz(q);
    }
    return out;
  };

  Mat Y = project_bounds(Mat::Zero(k, k));
  Mat Z = Mat::Zero(k, k);
  Mat X = Mat::Zero(k, k);
  double beta = 1.0;
  const double gamma = 1.618;
  double inner = 0.1 * tol;
  ConicSolution best;
  double best_merit = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es;

  for (int it = 1; it <= max_iter; ++it) {
    Mat Wf = V.transpose() * (Y + Z / beta) * V;
    es.compute(0.5 * (Wf + Wf.transpose()));
    const Vec& lam = es.eigenvalues();
    int first = 0;
    while (first < r && lam(first) <= 0.0) ++first;
    const int rp = r - first;
    if (rp > 0) {
      Mat Vp = V * es.eigenvectors().rightCols(rp);
      X.noalias() = Vp * lam.tail(rp).asDiagonal() * Vp.transpose();
    } else {
      X.setZero();
    }
    Mat Yn = project_bounds(X - (Cs + Z) / beta);
    Z += gamma * beta * (Yn - X);
    const double pr = (Yn - X).norm() / (1.0 + std::max(X.norm(), Yn.norm()));
    const double dr = beta * (Yn - Y).norm() / (1.0 + cnorm);
    Y = std::move(Yn);
    if (!Z.allFinite() || !X.allFinite()) {
      best.status = SolveStatus::numerical;
      break;
    }

    if (it % 10 == 0) {
      if (pr > 5.0 * dr) beta *= 1.5;
      else if (dr > 5.0 * pr) beta /= 1.5;
    }
    if (it % 25 == 0 && pr <= inner && dr <= inner) {
      ConicSolution cur = assemble(X, Z);
      cur.iterations = it;
      cur.residuals = kkt_residuals(prog, cur).relative;
      const double merit = std::max({cur.residuals.primal_feas, cur.residuals.dual_feas, cur.residuals.gap});
      if (merit < best_merit) {
        best = cur;
        best_merit = merit;
      }
      if (merit <= tol) {
        cur.status = SolveStatus::optimal;
        return cur;
      }
      inner *= 0.3;
    }
  }
  if (best.x.size() != n) {
    best = assemble(X, Z);
    best.residuals = kkt_residuals(prog, best).relative;
    best.iterations = max_iter;
  }
  if (best.status != SolveStatus::numerical) best.status = SolveStatus::max_iter;
  return best;
}

}  // namespace gwsteer::detail
