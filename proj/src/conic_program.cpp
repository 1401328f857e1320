#include <Eigen/Eigenvalues>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "gwsteer/conic.hpp"
#include "gwsteer/errors.hpp"

namespace gwsteer {

int svec_dim(int order) { return order * (order + 1) / 2; }

int svec_index(int i, int j, int order) {
  // column j of the lower triangle starts after columns 0..j-1 of lengths order, order-1, ...
  return j * order - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& X) {
  const int k = static_cast<int>(X.rows());
  Eigen::VectorXd v(svec_dim(k));
  int idx = 0;
  for (int j = 0; j < k; ++j) {
    v(idx++) = X(j, j);
    for (int i = j + 1; i < k; ++i) v(idx++) = M_SQRT2 * 0.5 * (X(i, j) + X(j, i));
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order) {
  Eigen::MatrixXd X(order, order);
  int idx = 0;
  for (int j = 0; j < order; ++j) {
    X(j, j) = v(idx++);
    for (int i = j + 1; i < order; ++i) {
      double val = v(idx++) * M_SQRT1_2;
      X(i, j) = val;
      X(j, i) = val;
    }
  }
  return X;
}

double min_eigenvalue(const Eigen::MatrixXd& X) {
  if (X.size() == 0) return 0.0;
  if (X.rows() == 1) return X(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical: return "numerical";
  }
  return "unknown";
}

int ConicProgram::num_rows() const {
  int m = 0;
  for (const Cone& k : cones) m += k.rows();
  return m;
}

void ConicProgram::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("conic program: " + msg); };
  if (num_vars < 1) fail("needs at least one variable");
  if (c.size() != num_vars) fail("objective length differs from variable count");
  const int m = num_rows();
  if (A.rows() != m || A.cols() != num_vars) {
    std::ostringstream os;
    os << "A is " << A.rows() << "x" << A.cols() << ", expected " << m << "x" << num_vars;
    fail(os.str());
  }
  if (b.size() != m) fail("right-hand side length differs from cone rows");
  if (P.size() != 0 && (P.rows() != num_vars || P.cols() != num_vars))
    fail("quadratic term has wrong shape");
  if (!c.allFinite() || !b.allFinite()) fail("non-finite data");
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      if (!std::isfinite(it.value())) fail("non-finite constraint coefficient");
  int npsd = 0;
  for (const Cone& k : cones) {
    if (k.dim < 1) fail("cone dimensions must be positive");
    if (k.kind == ConeKind::psd) ++npsd;
  }
  if (!psd_faces.empty()) {
    if (static_cast<int>(psd_faces.size()) != npsd) fail("face hints must match the PSD cones");
    int idx = 0;
    for (const Cone& k : cones) {
      if (k.kind != ConeKind::psd) continue;
      const Eigen::MatrixXd& V = psd_faces[idx++];
      if (V.size() == 0) continue;
      if (V.rows() != k.dim || V.cols() > k.dim) fail("face hint has wrong shape");
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(V.cols(), V.cols());
      if ((V.transpose() * V - I).cwiseAbs().maxCoeff() > 1e-8) fail("face hint is not orthonormal");
    }
  }
}

ResidualReport kkt_residuals(const ConicProgram& prog, const ConicSolution& sol) {
  ResidualReport r;
  const int n = prog.num_vars;
  const int m = prog.num_rows();
  if (sol.x.size() != n || sol.y.size() != m)
    throw InputError("kkt_residuals: solution dimensions do not match the program");
  Eigen::VectorXd s = prog.b - prog.A * sol.x;
  Eigen::VectorXd Px = prog.has_quadratic() ? Eigen::VectorXd(prog.P * sol.x) : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd rd = Px + prog.c + prog.A.transpose() * sol.y;
  r.dual_abs = rd.norm();
  int off = 0;
  for (const Cone& k : prog.cones) {
    const int rows = k.rows();
    auto sk = s.segment(off, rows);
    auto yk = sol.y.segment(off, rows);
    double pv = 0.0, dv = 0.0;
    switch (k.kind) {
      case ConeKind::zero:
        pv = sk.norm();
        break;
      case ConeKind::nonneg:
        pv = std::max(0.0, -sk.minCoeff());
        dv = std::max(0.0, -yk.minCoeff());
        r.complementarity += sk.dot(yk);
        break;
      case ConeKind::psd:
        pv = std::max(0.0, -min_eigenvalue(smat(sk, k.dim)));
        dv = std::max(0.0, -min_eigenvalue(smat(yk, k.dim)));
        r.complementarity += sk.dot(yk);
        break;
    }
    r.primal_per_cone.push_back(pv);
    r.dual_per_cone.push_back(dv);
    r.primal_abs = std::max(r.primal_abs, pv);
    r.dual_abs = std::max(r.dual_abs, dv);
    off += rows;
  }
  r.complementarity = std::abs(r.complementarity);
  const double quad = 0.5 * sol.x.dot(Px);
  r.primal_objective = quad + prog.c.dot(sol.x);
  r.dual_objective = -quad - prog.b.dot(sol.y);
  r.relative.primal_feas = r.primal_abs / std::max(1.0, prog.b.norm());
  r.relative.dual_feas = r.dual_abs / std::max(1.0, prog.c.norm());
  r.relative.gap = std::abs(r.primal_objective - r.dual_objective) /
                   std::max({1.0, std::abs(r.primal_objective), std::abs(r.dual_objective)});
  return r;
}

ConicSolution solve_conic(const ConicProgram& prog, double tol) {
  SolverSettings s;
  s.tol = tol;
  return solve_conic(prog, s);
}

ConicSolution solve_conic(const ConicProgram& prog, const SolverSettings& settings) {
  prog.validate();
  if (!(settings.tol > 0.0)) throw InputError("solver tolerance must be positive");
  SolveMethod method = settings.method;
  if (method == SolveMethod::automatic) {
    bool hinted = false;
    for (const auto& V : prog.psd_faces) hinted = hinted || V.size() > 0;
    method = hinted && !prog.has_quadratic() ? SolveMethod::face_splitting : SolveMethod::interior_point;
  }
  if (method == SolveMethod::face_splitting)
    return detail::solve_face_splitting(prog, settings.tol, settings.max_iter > 0 ? settings.max_iter : 50000);
  return detail::solve_interior_point(prog, settings.tol, settings.max_iter > 0 ? settings.max_iter : 200);
}

// Triplet format, 0-based indices, one record per line:
//   conic-program v1
//   vars <n> rows <m>
//   cones <count>            followed by <count> lines "zero|nonneg|psd <dim>"
//   c <nnz>                  followed by "<j> <value>"
//   P <nnz>                  followed by "<i> <j> <value>"
//   A <nnz>                  followed by "<i> <j> <value>"
//   b <nnz>                  followed by "<i> <value>"
//   faces <count>            followed, per hint, by "face <psd_index> <rows> <cols>" and
//                            <rows> lines of <cols> values
void write_triplets(const ConicProgram& prog, std::ostream& os) {
  os << std::setprecision(17);
  os << "conic-program v1\n";
  os << "vars " << prog.num_vars << " rows " << prog.num_rows() << "\n";
  os << "cones " << prog.cones.size() << "\n";
  for (const Cone& k : prog.cones) {
    const char* name = k.kind == ConeKind::zero ? "zero" : k.kind == ConeKind::nonneg ? "nonneg" : "psd";
    os << name << " " << k.dim << "\n";
  }
  auto dense_nnz = [](const Eigen::VectorXd& v) {
    int cnt = 0;
    for (int i = 0; i < v.size(); ++i) cnt += v(i) != 0.0;
    return cnt;
  };
  os << "c " << dense_nnz(prog.c) << "\n";
  for (int j = 0; j < prog.c.size(); ++j)
    if (prog.c(j) != 0.0) os << j << " " << prog.c(j) << "\n";
  auto dump_sparse = [&os](const char* tag, const Eigen::SparseMatrix<double>& M) {
    os << tag << " " << M.nonZeros() << "\n";
    for (int k = 0; k < M.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
        os << it.row() << " " << it.col() << " " << it.value() << "\n";
  };
  dump_sparse("P", prog.P);
  dump_sparse("A", prog.A);
  os << "b " << dense_nnz(prog.b) << "\n";
  for (int i = 0; i < prog.b.size(); ++i)
    if (prog.b(i) != 0.0) os << i << " " << prog.b(i) << "\n";
  int count = 0;
  for (const auto& V : prog.psd_faces) count += V.size() > 0;
  os << "faces " << count << "\n";
  for (size_t f = 0; f < prog.psd_faces.size(); ++f) {
    const Eigen::MatrixXd& V = prog.psd_faces[f];
    if (V.size() == 0) continue;
    os << "face " << f << " " << V.rows() << " " << V.cols() << "\n";
    for (int i = 0; i < V.rows(); ++i) {
      for (int j = 0; j < V.cols(); ++j) os << (j ? " " : "") << V(i, j);
      os << "\n";
    }
  }
}

ConicProgram read_triplets(std::istream& is) {
  auto expect = [&is](const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word) throw InputError("triplet file: expected '" + word + "'");
  };
  std::string version;
  expect("conic-program");
  is >> version;
  if (version != "v1") throw InputError("triplet file: unsupported version " + version);
  ConicProgram prog;
  int m = 0;
  expect("vars");
  is >> prog.num_vars;
  expect("rows");
  is >> m;
  size_t ncones = 0;
  expect("cones");
  is >> ncones;
  int npsd = 0;
  for (size_t k = 0; k < ncones; ++k) {
    std::string name;
    Cone cone;
    is >> name >> cone.dim;
    if (name == "zero") cone.kind = ConeKind::zero;
    else if (name == "nonneg") cone.kind = ConeKind::nonneg;
    else if (name == "psd") { cone.kind = ConeKind::psd; ++npsd; }
    else throw InputError("triplet file: unknown cone '" + name + "'");
    prog.cones.push_back(cone);
  }
  int nnz = 0;
  expect("c");
  is >> nnz;
  prog.c = Eigen::VectorXd::Zero(prog.num_vars);
  for (int k = 0; k < nnz; ++k) {
    int j;
    double v;
    is >> j >> v;
    prog.c(j) = v;
  }
  auto read_sparse = [&](const char* tag, int rows, int cols) {
    expect(tag);
    int cnt = 0;
    is >> cnt;
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < cnt; ++k) {
      int i, j;
      double v;
      is >> i >> j >> v;
      trip.emplace_back(i, j, v);
    }
    Eigen::SparseMatrix<double> M(rows, cols);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  };
  prog.P = read_sparse("P", prog.num_vars, prog.num_vars);
  if (prog.P.nonZeros() == 0) prog.P.resize(0, 0);
  prog.A = read_sparse("A", m, prog.num_vars);
  expect("b");
  is >> nnz;
  prog.b = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < nnz; ++k) {
    int i;
    double v;
    is >> i >> v;
    prog.b(i) = v;
  }
  int nfaces = 0;
  expect("faces");
  is >> nfaces;
  if (nfaces > 0) prog.psd_faces.assign(npsd, Eigen::MatrixXd());
  for (int f = 0; f < nfaces; ++f) {
    int idx, rows, cols;
    expect("face");
    is >> idx >> rows >> cols;
    Eigen::MatrixXd V(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) is >> V(i, j);
    prog.psd_faces.at(idx) = V;
  }
  if (!is) throw InputError("triplet file: truncated input");
  prog.validate();
  return prog;
}

}  // namespace gwsteer
