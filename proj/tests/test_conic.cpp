#include <doctest.h>

#include <random>
#include <sstream>

#include "gwsteer/conic.hpp"
#include "gwsteer/errors.hpp"
#include "gwsteer/sdp_relax.hpp"
#include "oracles.hpp"

using namespace gwsteer;

namespace {

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& M) { return M.sparseView(); }

// x >= lower componentwise, minimize sum x
ConicProgram box_lp(int n, double lower) {
  ConicProgram p;
  p.num_vars = n;
  p.c = Eigen::VectorXd::Ones(n);
  p.A = sparse(-Eigen::MatrixXd::Identity(n, n));
  p.b = Eigen::VectorXd::Constant(n, -lower);
  p.cones = {{ConeKind::nonneg, n}};
  return p;
}

// minimize <C, X> over 2x2 PSD X with trace 1
ConicProgram eig_sdp(const Eigen::Matrix2d& C) {
  ConicProgram p;
  p.num_vars = 3;
  p.c = svec(C);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 3);
  A.row(0) = svec(Eigen::Matrix2d::Identity()).transpose();
  A.bottomRows(3) = -Eigen::MatrixXd::Identity(3, 3);
  p.A = sparse(A);
  p.b = Eigen::VectorXd::Zero(4);
  p.b(0) = 1.0;
  p.cones = {{ConeKind::zero, 1}, {ConeKind::psd, 2}};
  return p;
}

}  // namespace

TEST_SUITE("conic_backend") {
  TEST_CASE("svec packing") {
    CHECK(svec_dim(3) == 6);
    Eigen::Matrix3d X;
    X << 1, 2, 3, 2, 4, 5, 3, 5, 6;
    const Eigen::VectorXd v = svec(X);
    REQUIRE(v.size() == 6);
    CHECK(v(svec_index(0, 0, 3)) == doctest::Approx(1.0));
    CHECK(v(svec_index(1, 0, 3)) == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(v(svec_index(2, 1, 3)) == doctest::Approx(5.0 * std::sqrt(2.0)));
    CHECK(svec_index(1, 0, 3) == 1);  // column-wise lower triangle
    CHECK(svec_index(1, 1, 3) == 3);
    CHECK((smat(v, 3) - X).norm() < 1e-14);
    CHECK(min_eigenvalue(X) == doctest::Approx(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(X).eigenvalues()(0)));
  }

  TEST_CASE("property: svec is an isometry for the trace inner product") {
    std::mt19937 rng(1);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 1 + trial % 6;
      Eigen::MatrixXd X(n, n), Y(n, n);
      for (int k = 0; k < n * n; ++k) X(k) = g(rng), Y(k) = g(rng);
      X = (X + X.transpose()).eval();
      Y = (Y + Y.transpose()).eval();
      CHECK(svec(X).dot(svec(Y)) == doctest::Approx((X * Y).trace()).epsilon(1e-12));
      CHECK((smat(svec(X), n) - X).norm() < 1e-12);
    }
  }

  TEST_CASE("linear program") {
    const ConicProgram p = box_lp(3, 1.0);
    const ConicSolution s = solve_conic(p, 1e-9);
    REQUIRE(s.status == SolveStatus::optimal);
    CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-7));
    const ResidualReport r = kkt_residuals(p, s);
    CHECK(r.relative.primal_feas < 1e-8);
    CHECK(r.relative.dual_feas < 1e-8);
    CHECK(r.dual_objective == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(s.y.minCoeff() > -1e-9);
  }

  TEST_CASE("quadratic program with an active bound") {
    // minimize 1/2 x^2 - 2x subject to x <= 1
    ConicProgram p;
    p.num_vars = 1;
    p.c = Eigen::VectorXd::Constant(1, -2.0);
    p.P = sparse(Eigen::MatrixXd::Identity(1, 1));
    p.A = sparse(Eigen::MatrixXd::Identity(1, 1));
    p.b = Eigen::VectorXd::Ones(1);
    p.cones = {{ConeKind::nonneg, 1}};
    const ConicSolution s = solve_conic(p, 1e-10);
    REQUIRE(s.status == SolveStatus::optimal);
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.objective == doctest::Approx(-1.5).epsilon(1e-8));
    CHECK(s.y(0) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("property: small SDP recovers the minimum eigenvalue") {
    std::mt19937 rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::Matrix2d C;
      C << g(rng), g(rng), 0, g(rng);
      C(1, 0) = C(0, 1);
      const ConicSolution s = solve_conic(eig_sdp(C), 1e-9);
      REQUIRE(s.status == SolveStatus::optimal);
      CHECK(s.objective == doctest::Approx(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(C).eigenvalues()(0))
                               .epsilon(1e-6));
      const ResidualReport r = kkt_residuals(eig_sdp(C), s);
      CHECK(r.relative.gap < 1e-6);
    }
  }

  TEST_CASE("infeasible program is reported") {
    ConicProgram p = box_lp(1, 1.0);
    Eigen::MatrixXd A(2, 1);
    A << -1, 1;
    p.A = sparse(A);
    p.b = Eigen::Vector2d(-1.0, 0.0);  // x >= 1 and x <= 0
    p.cones = {{ConeKind::nonneg, 2}};
    const ConicSolution s = solve_conic(p, 1e-8);
    CHECK(s.status == SolveStatus::infeasible);
  }

  TEST_CASE("program validation") {
    ConicProgram p = box_lp(2, 0.0);
    p.cones = {{ConeKind::nonneg, 3}};
    CHECK_THROWS_AS(p.validate(), InputError);
    CHECK_THROWS_AS(solve_conic(box_lp(2, 0.0), 0.0), InputError);
  }

  TEST_CASE("triplet round trip") {
    ConicProgram p = eig_sdp(Eigen::Matrix2d::Identity());
    p.P = sparse(0.5 * Eigen::MatrixXd::Identity(3, 3));
    std::stringstream ss;
    write_triplets(p, ss);
    const ConicProgram q = read_triplets(ss);
    CHECK(q.num_vars == p.num_vars);
    CHECK((q.c - p.c).norm() == 0.0);
    CHECK((q.b - p.b).norm() == 0.0);
    CHECK((Eigen::MatrixXd(q.A) - Eigen::MatrixXd(p.A)).norm() == 0.0);
    CHECK((Eigen::MatrixXd(q.P) - Eigen::MatrixXd(p.P)).norm() == 0.0);
    REQUIRE(q.cones.size() == 2);
    CHECK(q.cones[1].kind == ConeKind::psd);
    CHECK(q.cones[1].dim == 2);

    // full precision and face hints survive
    Eigen::MatrixXd X(2, 2);
    X << 0.1, 1.3, -0.7, 0.2;
    const ConicProgram g = build_gw_sdp(build_loss_tensor(MetricMatrix{oracle::sq_dist(X)}, MetricMatrix{oracle::sq_dist(X.transpose())}));
    std::stringstream gs;
    write_triplets(g, gs);
    const ConicProgram h = read_triplets(gs);
    CHECK((h.c - g.c).norm() == 0.0);
    CHECK((Eigen::MatrixXd(h.A) - Eigen::MatrixXd(g.A)).norm() == 0.0);
    REQUIRE(h.psd_faces.size() == g.psd_faces.size());
    CHECK((h.psd_faces[0] - g.psd_faces[0]).norm() == 0.0);

    std::stringstream bad("garbage");
    CHECK_THROWS_AS(read_triplets(bad), InputError);
  }

  TEST_CASE("face splitting agrees with the interior point method") {
    std::mt19937 rng(4);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::MatrixXd X(2, 2), Y(2, 2);
      for (int k = 0; k < 4; ++k) X(k) = g(rng), Y(k) = g(rng);
      const ConicProgram p =
          build_gw_sdp(build_loss_tensor(MetricMatrix{oracle::sq_dist(X)}, MetricMatrix{oracle::sq_dist(Y)}));
      // the lifted program has no interior point, so the interior method is run at a looser tolerance
      const ConicSolution a = solve_conic(p, SolverSettings{1e-7, 0, SolveMethod::interior_point});
      const ConicSolution b = solve_conic(p, SolverSettings{1e-8, 0, SolveMethod::face_splitting});
      REQUIRE(a.status == SolveStatus::optimal);
      REQUIRE(b.status == SolveStatus::optimal);
      CHECK(a.method != b.method);
      CHECK(std::abs(a.objective - b.objective) < 1e-5 * std::max(1.0, std::abs(a.objective)));
    }
  }
}
