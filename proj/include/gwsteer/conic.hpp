#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <string>
#include <vector>

namespace gwsteer {

// Standard form:  minimize  1/2 x'Px + c'x   subject to  A x + s = b,  s in K.
// K is the product of the cones in `cones`, in row order.  A PSD cone of order k occupies
// k(k+1)/2 rows holding svec(S): the lower triangle column by column, off-diagonal entries
// multiplied by sqrt(2), so that svec(X)'svec(Y) = trace(XY).
// The dual vector y satisfies P x + c + A'y = 0 with y in K* (free on zero cones).

enum class ConeKind { zero, nonneg, psd };

struct Cone {
  ConeKind kind = ConeKind::zero;
  int dim = 0;  // number of rows for zero/nonneg, matrix order for psd

  int rows() const { return kind == ConeKind::psd ? dim * (dim + 1) / 2 : dim; }
};

struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> P;  // empty (0x0) for a linear objective
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  std::vector<Cone> cones;
  // Optional, one entry per PSD cone in order: orthonormal basis V of a face known to
  // contain every feasible slack (S = V R V').  Empty matrix means no hint.
  std::vector<Eigen::MatrixXd> psd_faces;

  int num_rows() const;
  bool has_quadratic() const { return P.nonZeros() > 0; }
  void validate() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter, numerical };
std::string to_string(SolveStatus s);

struct Residuals {
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double gap = 0.0;
};

struct ConicSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double objective = 0.0;
  SolveStatus status = SolveStatus::numerical;
  Residuals residuals;
  int iterations = 0;
  std::string method;
};

enum class SolveMethod { automatic, interior_point, face_splitting };

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 0;  // 0 selects the method default
  SolveMethod method = SolveMethod::automatic;
};

ConicSolution solve_conic(const ConicProgram& prog, double tol);
ConicSolution solve_conic(const ConicProgram& prog, const SolverSettings& settings);

struct ResidualReport {
  std::vector<double> primal_per_cone;  // zero: ||b - Ax||, nonneg/psd: cone violation
  std::vector<double> dual_per_cone;    // dual cone violation (0 for zero cones)
  double primal_abs = 0.0;
  double dual_abs = 0.0;      // max(||Px + c + A'y||, dual cone violations)
  double complementarity = 0.0;  // |s'y| over non-zero cones with s = b - Ax
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  Residuals relative;  // primal / max(1,||b||), dual / max(1,||c||), gap / max(1,|pobj|,|dobj|)
};

ResidualReport kkt_residuals(const ConicProgram& prog, const ConicSolution& sol);

// Plain-text sparse triplet dump (format documented in README).
void write_triplets(const ConicProgram& prog, std::ostream& os);
ConicProgram read_triplets(std::istream& is);

// Symmetric packing helpers.
int svec_dim(int order);
int svec_index(int i, int j, int order);  // entry (i, j) with i >= j
Eigen::VectorXd svec(const Eigen::MatrixXd& X);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order);
double min_eigenvalue(const Eigen::MatrixXd& X);

namespace detail {
ConicSolution solve_interior_point(const ConicProgram& prog, double tol, int max_iter);
ConicSolution solve_face_splitting(const ConicProgram& prog, double tol, int max_iter);
}  // namespace detail

}  // namespace gwsteer
