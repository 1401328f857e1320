#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gwsteer/conic.hpp"
#include "gwsteer/gw_problem.hpp"
#include "gwsteer/mmspace.hpp"

namespace gwsteer {

struct LiftedPair {
  Coupling P;
  Eigen::MatrixXd Qhat;  // N^2 x N^2

  // [[Qhat, vec P], [vec P', 1]]
  Eigen::MatrixXd moment_matrix() const;
  static LiftedPair rank_one(const Coupling& P);
};

struct LiftedPairReport {
  double min_moment_eigenvalue = 0.0;
  double min_qhat_entry = 0.0;
  double linking_violation = 0.0;
  double row_sum_violation = 0.0;  // ||Qhat 1 - vec P||_inf
  double trace = 0.0;
  CouplingReport coupling;
  bool pass = false;
};

LiftedPairReport check_lifted_pair(const LiftedPair& pair);

struct CertificateTolerances {
  double ratio_tol = 1e-3;
  double rank_tol = 1e-5;
  // both GW(P) and the relaxation value at or below this count as a zero optimum (ratio 1)
  double zero_value = 1e-6;
};

struct Certificate {
  double ratio = 1.0;
  double rank_gap = 0.0;
  bool is_global = false;
  bool is_rank_one = false;
};

struct SdpOptions {
  bool qhat_nonneg = true;
  SolveMethod method = SolveMethod::automatic;
  int max_iter = 0;
  // Replace the solver point by the exact rank-one lift of its coupling (or of the rounded
  // permutation) when that lift is no worse than the solver value within the tolerance.
  bool polish = true;
  // Extra couplings offered to the polish step under the same acceptance rule.
  std::vector<Coupling> extra_candidates;
  CertificateTolerances cert;
};

struct SdpSolve {
  LiftedPair pair;      // returned point
  LiftedPair relaxed;   // solver point, moment matrix normalized by its corner
  GwValue value;
  Certificate certificate;
  // Diagnostics of the unpolished solver point (moment matrix normalized by its corner).
  double raw_value = 0.0;
  double raw_rank_gap = 0.0;
  bool polished = false;
  SolveStatus status = SolveStatus::optimal;
  Residuals residuals;
  int iterations = 0;
  std::string method;
  std::vector<std::string> warnings;
};

// Variables are svec of the (N^2+1)-order moment matrix; the program carries the face hint
// spanned by the null space of the linking/marginal constraints.
ConicProgram build_gw_sdp(const LossTensor& G, bool qhat_nonneg = true);

SdpSolve solve_gw_sdp(const LossTensor& G, double tol = 1e-5, const SdpOptions& opts = {});

Certificate certify(const LiftedPair& pair, const LossTensor& G, const CertificateTolerances& tol = {});
// Ratio of GW(P) to the relaxation value <G, relaxed.Qhat>; rank gap of the relaxed moment matrix.
Certificate certify(const Coupling& P, const LiftedPair& relaxed, const LossTensor& G,
                    const CertificateTolerances& tol = {});

struct Assignment {
  std::vector<int> sigma;  // agent i -> slot sigma[i]
  double residual = 0.0;   // ||P - Perm(sigma)/N||_F
};

// Maximum-weight matching; among maximal permutations the lexicographically smallest is returned.
Assignment extract_assignment(const Coupling& P);

}  // namespace gwsteer
