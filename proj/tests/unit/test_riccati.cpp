#include <doctest.h>

#include <cmath>

#include "mfsc/riccati.hpp"
#include "support/instances.hpp"

using namespace mfsc;

namespace {

RiccatiSolution solve(const SystemSpec& spec) {
  return solve_riccati(spec, derive_matrices(spec));
}

}  // namespace

TEST_CASE("scalar benchmark matches the tanh closed form") {
  const SystemSpec spec = testsupport::tanh_instance(1000);
  const RiccatiSolution sol = solve(spec);
  CHECK(std::abs(sol.P[0][0](0, 0) - std::tanh(1.0)) <= 1e-6);
  // interior nodes too
  const int mid = 500;
  CHECK(std::abs(sol.P[mid][0](0, 0) - std::tanh(1.0 - sol.t(mid))) <= 1e-6);
}

TEST_CASE("zero weights give the zero solution") {
  SystemSpec spec = testsupport::tanh_instance(200);
  spec.clusters[0].Q.setZero();
  spec.clusters[0].H.setZero();
  const RiccatiSolution sol = solve(spec);
  for (int k = 0; k <= 200; k += 50) {
    CHECK(sol.P[k][0](0, 0) == 0.0);
    CHECK(sol.KK[k](0, 0) == 0.0);
  }
}

TEST_CASE("no control authority reduces to linear growth") {
  // A = 0, B = 0, Q = H = I: dP/dt = -Q, so P(t) = (1 + T - t) I.
  auto c = testsupport::cluster1d(0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 1);
  const SystemSpec spec = testsupport::make_spec(
      {c}, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 1.0,
      100);
  const RiccatiSolution sol = solve(spec);
  CHECK(sol.P[0][0](0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(sol.P[50][0](0, 0) == doctest::Approx(1.5).epsilon(1e-13));
}

TEST_CASE("terminal conditions are assigned exactly") {
  const SystemSpec spec = testsupport::generic_two_cluster(50);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution sol = solve_riccati(spec, d);
  for (int q = 0; q < 2; ++q) {
    CHECK((sol.P[50][q] - spec.clusters[q].H).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((sol.KK[50] + d.Hbar).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coupling equation vanishes without couplings") {
  SystemSpec spec = testsupport::generic_two_cluster(100);
  for (auto& c : spec.clusters) {
    c.G.setZero();
    c.Gamma.setZero();
  }
  const RiccatiSolution sol = solve(spec);
  for (int k = 0; k <= 100; k += 20) {
    CHECK(sol.KK[k].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("coupled sweep self-converges under grid refinement") {
  const SystemSpec coarse = testsupport::generic_two_cluster(400);
  SystemSpec fine = coarse;
  fine.steps = 4000;
  const RiccatiSolution a = solve(coarse);
  const RiccatiSolution b = solve(fine);
  CHECK((a.KK[0] - b.KK[0]).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((a.P[0][0] - b.P[0][0]).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("fourth-order convergence of the initial values") {
  const SystemSpec s1 = testsupport::generic_two_cluster(100);
  SystemSpec s2 = s1, s4 = s1;
  s2.steps = 200;
  s4.steps = 400;
  const double p1 = solve(s1).KK[0].cwiseAbs().maxCoeff();
  const Eigen::MatrixXd k1 = solve(s1).KK[0];
  const Eigen::MatrixXd k2 = solve(s2).KK[0];
  const Eigen::MatrixXd k4 = solve(s4).KK[0];
  (void)p1;
  const double d12 = (k1 - k2).cwiseAbs().maxCoeff();
  const double d24 = (k2 - k4).cwiseAbs().maxCoeff();
  REQUIRE(d24 > 0.0);
  CHECK(d12 / d24 >= 8.0);  // h^4 predicts 16
}

TEST_CASE("P stays symmetric and PSD on the grid") {
  const SystemSpec spec = testsupport::generic_two_cluster(500);
  const RiccatiSolution sol = solve(spec);
  CHECK(sol.max_p_asymmetry <= 1e-9);
  for (int k = 0; k <= 500; k += 100) {
    for (int q = 0; q < 2; ++q) {
      CHECK((sol.P[k][q] - sol.P[k][q].transpose()).cwiseAbs().maxCoeff() ==
            0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.P[k][q]);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("population-weighted coupling solution stays N^K-symmetric") {
  // N^K K^K symmetric is what makes the value-function quadratic form
  // consistent; a structural regression test on a heterogeneous instance.
  const SystemSpec spec = testsupport::generic_two_cluster(400, 3, 7);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution sol = solve_riccati(spec, d);
  for (int k = 0; k <= 400; k += 100) {
    const Eigen::MatrixXd NKK = d.NK * sol.KK[k];
    const double scale = std::max(1.0, NKK.cwiseAbs().maxCoeff());
    CHECK((NKK - NKK.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale);
  }
}

TEST_CASE("per-cluster P solve touches only that cluster's data") {
  const SystemSpec spec = testsupport::generic_two_cluster(100, 2, 3);
  SystemSpec permuted = spec;
  // mutate cluster 1 arbitrarily; cluster 0's P must not move bitwise
  permuted.clusters[1].A(0, 0) = 5.0;
  permuted.clusters[1].Q(0, 0) = 9.0;
  const auto p_a = solve_P(spec, derive_matrices(spec));
  const auto p_b = solve_P(permuted, derive_matrices(permuted));
  for (int k = 0; k <= 100; k += 25) {
    CHECK((p_a[k][0] - p_b[k][0]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("row blocks of the coupled solution are views of K^K") {
  const SystemSpec spec = testsupport::generic_two_cluster(50);
  const RiccatiSolution sol = solve(spec);
  for (int q = 0; q < 2; ++q) {
    CHECK((sol.kbar(25, q) - sol.KK[25].middleRows(q, 1)).cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("residual certificate: closed-form instance") {
  const SystemSpec spec = testsupport::tanh_instance(1000);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution sol = solve_riccati(spec, d);
  const RiccatiResiduals res = riccati_residual(sol, spec, d);
  CHECK(res.p_max <= 1e-4);
  CHECK(res.k_max <= 1e-4);
}

TEST_CASE("residual certificate: zero instance is exact") {
  SystemSpec spec = testsupport::generic_two_cluster(100);
  for (auto& c : spec.clusters) {
    c.Q.setZero();
    c.H.setZero();
    c.G.setZero();
    c.Gamma.setZero();
  }
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution sol = solve_riccati(spec, d);
  const RiccatiResiduals res = riccati_residual(sol, spec, d);
  CHECK(res.p_max == 0.0);
  CHECK(res.k_max == 0.0);
}

TEST_CASE("residual certificate is second order in the grid step") {
  const SystemSpec coarse = testsupport::generic_two_cluster(250);
  SystemSpec fine = coarse;
  fine.steps = 500;
  const DerivedMatrices d = derive_matrices(coarse);
  const RiccatiResiduals rc = riccati_residual(solve(coarse), coarse, d);
  const RiccatiResiduals rf = riccati_residual(solve(fine), fine, d);
  REQUIRE(rf.p_max > 0.0);
  CHECK(rc.p_max / rf.p_max == doctest::Approx(4.0).epsilon(0.25));
  CHECK(rc.k_max / rf.k_max == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("closed-loop matrices follow their definitions") {
  SystemSpec spec = testsupport::generic_two_cluster(100);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution sol = solve_riccati(spec, d);
  const ClosedLoopMatrices cl = closed_loop_matrices(sol, d);

  // scalar arithmetic check at an interior node
  const int k = 40;
  for (int q = 0; q < 2; ++q) {
    const double A = spec.clusters[q].A(0, 0);
    const double B = spec.clusters[q].B(0, 0);
    const double R = spec.clusters[q].R(0, 0);
    const double P = sol.P[k][q](0, 0);
    CHECK(cl.Atilde[k][q](0, 0) ==
          doctest::Approx(A - B * B * P / R).epsilon(1e-14));
  }

  // with zero weights: Atilde = A, Gtilde = Gbar, Z^K = 0
  SystemSpec zero = spec;
  for (auto& c : zero.clusters) {
    c.Q.setZero();
    c.H.setZero();
    c.Gamma.setZero();
  }
  const DerivedMatrices dz = derive_matrices(zero);
  const RiccatiSolution solz = solve_riccati(zero, dz);
  const ClosedLoopMatrices clz = closed_loop_matrices(solz, dz);
  for (int q = 0; q < 2; ++q) {
    CHECK((clz.Atilde[k][q] - zero.clusters[q].A).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((clz.Gtilde[k][q] - dz.Gbar[q]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(zK_matrix(solz, dz, k).cwiseAbs().maxCoeff() == 0.0);
  CHECK(zK_matrix(sol, d, k).rows() == 2);
  CHECK(zK_matrix(sol, d, k).cols() == 4);  // nK x nK^2 with n=1, K=2
}

TEST_CASE("divergence is reported with diagnostics") {
  // An unstable pure-integration instance with a huge horizon overflows in
  // finite arithmetic; the sweep must fail loudly, not return garbage.
  auto c = testsupport::cluster1d(40.0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 1);
  const SystemSpec spec = testsupport::make_spec(
      {c}, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 60.0,
      60);
  CHECK_THROWS_AS(solve_riccati(spec, derive_matrices(spec)),
                  SolverDivergence);
}
