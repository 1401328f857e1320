#include "gwsteer/sdp_relax.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

Eigen::MatrixXd LiftedPair::moment_matrix() const {
  const int n2 = static_cast<int>(Qhat.rows());
  Eigen::MatrixXd M(n2 + 1, n2 + 1);
  Eigen::VectorXd p = P.vec();
  M.topLeftCorner(n2, n2) = Qhat;
  M.topRightCorner(n2, 1) = p;
  M.bottomLeftCorner(1, n2) = p.transpose();
  M(n2, n2) = 1.0;
  return M;
}

LiftedPair LiftedPair::rank_one(const Coupling& P) {
  Eigen::VectorXd p = P.vec();
  return LiftedPair{P, p * p.transpose()};
}

LiftedPairReport check_lifted_pair(const LiftedPair& pair) {
  LiftedPairReport r;
  const int N = pair.P.size();
  const int n2 = N * N;
  Eigen::VectorXd p = pair.P.vec();
  r.min_moment_eigenvalue = min_eigenvalue(pair.moment_matrix());
  r.min_qhat_entry = pair.Qhat.minCoeff();
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n2), f = Eigen::VectorXd::Zero(n2);
    for (int j = 0; j < N; ++j) {
      e(flat_index(i, j, N)) = 1.0;
      f(flat_index(j, i, N)) = 1.0;
    }
    r.linking_violation = std::max(r.linking_violation, (pair.Qhat * e - p / N).cwiseAbs().maxCoeff());
    r.linking_violation = std::max(r.linking_violation, (pair.Qhat * f - p / N).cwiseAbs().maxCoeff());
  }
  r.row_sum_violation = (pair.Qhat * Eigen::VectorXd::Ones(n2) - p).cwiseAbs().maxCoeff();
  r.trace = pair.Qhat.trace();
  r.coupling = validate_coupling(pair.P);
  r.pass = r.coupling.pass && r.min_moment_eigenvalue >= -1e-7 && r.min_qhat_entry >= -1e-7 &&
           r.linking_violation <= 1e-6 && r.row_sum_violation <= 1e-6 && r.trace <= 1.0 + 1e-6;
  return r;
}

ConicProgram build_gw_sdp(const LossTensor& G, bool qhat_nonneg) {
  const int n2 = static_cast<int>(G.entries.rows());
  const int N = G.N();
  if (G.entries.cols() != n2 || N * N != n2) throw InputError("loss tensor must be N^2 x N^2");
  if (!G.entries.allFinite()) throw InputError("loss tensor has non-finite entries");
  if (!G.swap_symmetric(1e-12)) throw InputError("loss tensor is not swap-symmetric");
  const int k = n2 + 1;
  const int corner = svec_index(n2, n2, k);
  auto qvar = [k](int p, int q) { return p >= q ? svec_index(p, q, k) : svec_index(q, p, k); };
  auto pvar = [k, n2](int p) { return svec_index(n2, p, k); };

  ConicProgram prog;
  prog.num_vars = svec_dim(k);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(k, k);
  C.topLeftCorner(n2, n2) = 0.5 * (G.entries + G.entries.transpose());
  prog.c = svec(C);

  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> rhs;
  int row = 0;
  // corner = 1
  trip.emplace_back(row++, corner, 1.0);
  rhs.push_back(1.0);
  // marginals: N row sums and N-1 column sums (the last is implied)
  for (int i = 0; i < N; ++i, ++row) {
    for (int j = 0; j < N; ++j) trip.emplace_back(row, pvar(flat_index(i, j, N)), M_SQRT1_2);
    rhs.push_back(1.0 / N);
  }
  for (int j = 0; j < N - 1; ++j, ++row) {
    for (int i = 0; i < N; ++i) trip.emplace_back(row, pvar(flat_index(i, j, N)), M_SQRT1_2);
    rhs.push_back(1.0 / N);
  }
  // linking: Qhat vec(e_i 1') = vec(P)/N and Qhat vec(1 e_j') = vec(P)/N
  for (int side = 0; side < 2; ++side)
    for (int a = 0; a < N; ++a)
      for (int p = 0; p < n2; ++p, ++row) {
        for (int b = 0; b < N; ++b) {
          const int q = side == 0 ? flat_index(a, b, N) : flat_index(b, a, N);
          trip.emplace_back(row, qvar(p, q), p == q ? 1.0 : M_SQRT1_2);
        }
        trip.emplace_back(row, pvar(p), -M_SQRT1_2 / N);
        rhs.push_back(0.0);
      }
  const int zero_rows = row;
  prog.cones.push_back({ConeKind::zero, zero_rows});

  int nn = 0;
  if (qhat_nonneg)
    for (int q = 0; q < n2; ++q)
      for (int p = q; p < n2; ++p, ++nn) trip.emplace_back(row++, qvar(p, q), -1.0);
  for (int p = 0; p < n2; ++p, ++nn) trip.emplace_back(row++, pvar(p), -1.0);
  rhs.insert(rhs.end(), nn, 0.0);
  prog.cones.push_back({ConeKind::nonneg, nn});

  for (int v = 0; v < prog.num_vars; ++v) trip.emplace_back(row++, v, -1.0);
  rhs.insert(rhs.end(), prog.num_vars, 0.0);
  prog.cones.push_back({ConeKind::psd, k});

  prog.A.resize(row, prog.num_vars);
  prog.A.setFromTriplets(trip.begin(), trip.end());
  prog.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<long>(rhs.size()));

  // Feasible moment matrices satisfy M a = 0 for a = [vec(e_i 1'); -1/N] and [vec(1 e_j'); -1/N].
  Eigen::MatrixXd Acon = Eigen::MatrixXd::Zero(k, 2 * N);
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      Acon(flat_index(a, b, N), a) = 1.0;
      Acon(flat_index(b, a, N), N + a) = 1.0;
    }
    Acon(n2, a) = -1.0 / N;
    Acon(n2, N + a) = -1.0 / N;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Acon);
  const int rank = static_cast<int>(qr.rank());
  Eigen::MatrixXd Q = qr.householderQ();
  prog.psd_faces.push_back(Q.rightCols(k - rank));
  return prog;
}

Certificate certify(const Coupling& P, const LiftedPair& relaxed, const LossTensor& G,
                    const CertificateTolerances& tol) {
  Certificate cert;
  if (relaxed.Qhat.rows() != G.entries.rows() || relaxed.Qhat.cols() != G.entries.cols() ||
      P.size() * P.size() != G.entries.rows())
    throw InputError("lifted pair and loss tensor sizes differ");
  const double num = gw_objective(P, G);
  const double den = (relaxed.Qhat.array() * G.entries.array()).sum();
  if (std::max(num, den) <= tol.zero_value) {
    cert.ratio = 1.0;
  } else if (den < 1e-12) {
    std::ostringstream os;
    os << "certificate undefined: relaxation value " << den << " with coupling value " << num;
    throw CertificateError(os.str());
  } else {
    cert.ratio = num / den;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(relaxed.moment_matrix(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double l1 = ev(ev.size() - 1);
  const double l2 = ev.size() > 1 ? std::max(0.0, ev(ev.size() - 2)) : 0.0;
  cert.rank_gap = l1 > 0 ? l2 / l1 : 0.0;
  cert.is_global = std::abs(cert.ratio - 1.0) <= tol.ratio_tol;
  cert.is_rank_one = cert.rank_gap <= tol.rank_tol;
  return cert;
}

Certificate certify(const LiftedPair& pair, const LossTensor& G, const CertificateTolerances& tol) {
  return certify(pair.P, pair, G, tol);
}

namespace {

// Hungarian algorithm (potentials); returns the maximum total weight of a perfect matching
// between rows `rows` and columns `cols` of W.
double max_matching(const Eigen::MatrixXd& W, const std::vector<int>& rows, const std::vector<int>& cols,
                    std::vector<int>* assign = nullptr) {
  const int n = static_cast<int>(rows.size());
  if (n == 0) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  auto cost = [&](int i, int j) { return -W(rows[i - 1], cols[j - 1]); };
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          double cur = cost(i0, j) - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  if (assign) assign->assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    total += W(rows[p[j] - 1], cols[j - 1]);
    if (assign) (*assign)[p[j] - 1] = j - 1;
  }
  return total;
}

}  // namespace

Assignment extract_assignment(const Coupling& P) {
  const int N = P.size();
  const Eigen::MatrixXd& W = P.entries;
  std::vector<int> rows(N), cols(N);
  for (int i = 0; i < N; ++i) rows[i] = cols[i] = i;
  const double best = max_matching(W, rows, cols);
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  Assignment out;
  out.sigma.assign(N, -1);
  double fixed = 0.0;
  std::vector<int> free_cols = cols;
  for (int i = 0; i < N; ++i) {
    std::vector<int> rest_rows(rows.begin() + i + 1, rows.end());
    for (size_t c = 0; c < free_cols.size(); ++c) {
      std::vector<int> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<long>(c));
      double total = fixed + W(i, free_cols[c]) + max_matching(W, rest_rows, rest_cols);
      if (total >= best - slack) {
        out.sigma[i] = free_cols[c];
        fixed += W(i, free_cols[c]);
        free_cols = std::move(rest_cols);
        break;
      }
    }
  }
  out.residual = (W - Coupling::scaled_permutation(out.sigma).entries).norm();
  return out;
}

SdpSolve solve_gw_sdp(const LossTensor& G, double tol, const SdpOptions& opts) {
  const int N = G.N();
  const int n2 = N * N;
  ConicProgram prog = build_gw_sdp(G, opts.qhat_nonneg);
  SolverSettings settings;
  settings.tol = tol;
  settings.method = opts.method;
  settings.max_iter = opts.max_iter;
  ConicSolution sol = solve_conic(prog, settings);

  SdpSolve out;
  out.status = sol.status;
  out.residuals = sol.residuals;
  out.iterations = sol.iterations;
  out.method = sol.method;
  if (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::unbounded)
    throw NumericError("internal: GW relaxation reported " + to_string(sol.status) +
                       " although it is strictly feasible by construction");
  if (sol.status != SolveStatus::optimal) {
    std::ostringstream os;
    os << "SDP solve ended with status " << to_string(sol.status) << " (primal " << sol.residuals.primal_feas
       << ", dual " << sol.residuals.dual_feas << ", gap " << sol.residuals.gap << ")";
    out.warnings.push_back(os.str());
  }

  Eigen::MatrixXd M = smat(sol.x, n2 + 1);
  const double corner = M(n2, n2);
  if (!(corner > 0.5) || !M.allFinite()) throw NumericError("SDP solution has an invalid moment corner");
  M /= corner;
  Eigen::VectorXd p = M.row(n2).head(n2).transpose();
  Eigen::MatrixXd Praw = Eigen::Map<Eigen::MatrixXd>(p.data(), N, N);
  Coupling P(Praw);
  if (!validate_coupling(P).pass || Praw.minCoeff() < 0) P = project_to_couplings(Praw);
  out.relaxed = LiftedPair{Coupling(Praw), M.topLeftCorner(n2, n2)};
  LiftedPair pair{P, out.relaxed.Qhat};
  out.raw_value = (pair.Qhat.array() * G.entries.array()).sum();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    out.raw_rank_gap = std::max(0.0, ev(ev.size() - 2)) / ev(ev.size() - 1);
  }

  double value = out.raw_value;
  if (opts.polish) {
    std::vector<Coupling> candidates{P, Coupling::scaled_permutation(extract_assignment(P).sigma)};
    // Columns of Qhat are couplings conditioned on one assignment; they separate the
    // members of a symmetric optimal face that average out in P.
    for (int col = 0; col < n2; ++col) {
      if (p(col) <= 1e-6) continue;
      Eigen::VectorXd q = pair.Qhat.col(col) / p(col);
      Eigen::MatrixXd Qc = Eigen::Map<Eigen::MatrixXd>(q.data(), N, N) / N;
      candidates.push_back(Coupling::scaled_permutation(extract_assignment(Coupling(Qc)).sigma));
    }
    for (const Coupling& c : opts.extra_candidates)
      if (c.size() == N) candidates.push_back(c);
    // GW values are nonnegative, so max(raw, 0) is still a lower bound
    const double bound = std::max(out.raw_value, 0.0);
    const double slack = tol * std::max(1.0, bound);
    for (const Coupling& cand : candidates) {
      const double v = gw_objective(cand, G);
      if (v <= bound + slack && (!out.polished || v < value)) {
        pair = LiftedPair::rank_one(cand);
        value = v;
        out.polished = true;
      }
    }
  }
  out.pair = pair;
  out.value.value = value;
  out.value.coupling = pair.P;
  out.value.method = GwMethod::sdp;
  out.certificate = certify(pair.P, out.relaxed, G, opts.cert);
  return out;
}

}  // namespace gwsteer
