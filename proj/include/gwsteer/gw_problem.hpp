#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gwsteer/mmspace.hpp"

namespace gwsteer {

inline constexpr double tol_feas = 1e-8;

// Transport plan with uniform marginals 1/N.
struct Coupling {
  Eigen::MatrixXd entries;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;

  Coupling() = default;
  explicit Coupling(Eigen::MatrixXd P);

  int size() const { return static_cast<int>(entries.rows()); }
  Eigen::VectorXd vec() const;  // column-major

  static Coupling uniform(int N);
  static Coupling scaled_permutation(const std::vector<int>& sigma);  // P(i, sigma[i]) = 1/N
  static Coupling from_vec(const Eigen::VectorXd& v, int N);
};

enum class GwMethod { sdp, oracle_grid, oracle_permutation, local };
std::string to_string(GwMethod m);

struct GwValue {
  double value = 0.0;
  Coupling coupling;
  GwMethod method = GwMethod::sdp;
};

struct CouplingReport {
  double max_marginal_violation = 0.0;
  double min_entry = 0.0;
  double total_mass = 0.0;
  bool pass = false;
};

double gw_objective(const Coupling& P, const LossTensor& G);
double gw_objective(const Eigen::MatrixXd& P, const LossTensor& G);

CouplingReport validate_coupling(const Coupling& P);

enum class OracleMode { grid, permutation };

// grid: N = 2 only, P(a) = [[a, 1/2-a], [1/2-a, a]] scanned at `resolution` points of [0, 1/2].
// permutation: N <= 4, all scaled permutation matrices (an upper bound on the optimum).
GwValue oracle_gw(const LossTensor& G, int N, OracleMode mode, int resolution = 100001);

// Projected gradient with step halving; `history` receives the objective after every accepted step.
GwValue local_gw(const LossTensor& G, const Coupling& P0, double step, int iters,
                 std::vector<double>* history = nullptr);

// Euclidean projection onto couplings with uniform marginals (Dykstra alternating projections).
Coupling project_to_couplings(const Eigen::MatrixXd& M);

}  // namespace gwsteer
