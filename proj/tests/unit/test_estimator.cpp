#include <doctest.h>

#include <cmath>
#include <limits>

#include "mfsc/estimator.hpp"
#include "mfsc/harness.hpp"
#include "mfsc/simulate.hpp"
#include "support/instances.hpp"

using namespace mfsc;

namespace {

struct Solved {
  SystemSpec spec;
  DerivedMatrices d;
  RiccatiSolution sol;
  ClosedLoopMatrices cl;
  explicit Solved(SystemSpec s)
      : spec(std::move(s)),
        d(derive_matrices(spec)),
        sol(solve_riccati(spec, d)),
        cl(closed_loop_matrices(sol, d)) {}
};

}  // namespace

TEST_CASE("initialization copies observed blocks and defaults the rest") {
  SystemSpec spec = testsupport::generic_two_cluster(50);
  Eigen::VectorXd xK0(2);
  xK0 << 3.0, -2.0;

  SUBCASE("complete graph copies everything") {
    spec.topology.E.setOnes();
    const DerivedMatrices d = derive_matrices(spec);
    const Eigen::MatrixXd est = init_estimator(spec, d, xK0);
    for (int q = 0; q < 2; ++q) {
      CHECK((est.col(q) - xK0).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("empty graph starts at the stacked means") {
    spec.topology.E.setZero();
    const DerivedMatrices d = derive_matrices(spec);
    const Eigen::MatrixXd est = init_estimator(spec, d, xK0);
    const Eigen::VectorXd mbar = stacked_init_mean(spec);
    for (int q = 0; q < 2; ++q) {
      CHECK((est.col(q) - mbar).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("degenerate initial law makes both branches agree") {
    for (auto& c : spec.clusters) c.init_cov.setZero();
    const DerivedMatrices d = derive_matrices(spec);
    const Eigen::VectorXd mbar = stacked_init_mean(spec);
    spec.topology.E.setZero();
    const Eigen::MatrixXd est0 = init_estimator(spec, d, mbar);
    spec.topology.E.setOnes();
    const Eigen::MatrixXd est1 = init_estimator(spec, d, mbar);
    CHECK((est0 - est1).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single cluster with self-loop never runs the flow branch") {
  Solved s(testsupport::tanh_instance(100, 4, 0.3, 0.5));
  const NoiseBundle noise = draw_noise(s.spec, 2, 3);
  const auto [bundle, trace] = simulate_distributed(s.spec, s.d, s.sol, noise);
  for (int p = 0; p < 2; ++p) {
    for (int k = 0; k <= 100; k += 10) {
      CHECK((trace.est[p][k].col(0) - bundle.xK[p][k]).cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("observed blocks carry zero error at every step") {
  Solved s(testsupport::generic_two_cluster(150, 3, 4));  // self-loops only
  const NoiseBundle noise = draw_noise(s.spec, 3, 17);
  const auto [bundle, trace] = simulate_distributed(s.spec, s.d, s.sol, noise);
  for (int p = 0; p < 3; ++p) {
    for (int k = 0; k <= 150; k += 10) {
      for (int q = 0; q < 2; ++q) {
        // block q is observed by cluster q (self-loop)
        CHECK(std::abs(trace.est[p][k](q, q) - bundle.xK[p][k](q)) == 0.0);
      }
    }
  }
}

TEST_CASE("estimator reads only neighbor blocks of the observation") {
  // Poison the non-neighbor blocks; any read would propagate the NaN.
  Solved s(testsupport::generic_two_cluster(50));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Eigen::VectorXd observed(2);
  observed << 1.5, nan;  // cluster 0 observes only block 0
  Eigen::MatrixXd est = init_estimator(s.spec, s.d, observed);
  CHECK(est.col(0).allFinite());
  CHECK(est(0, 0) == 1.5);

  Eigen::VectorXd state = est.col(0);
  step_estimator(state, 0, s.spec, s.d, s.cl, 10, observed);
  CHECK(state.allFinite());
  CHECK(state(0) == 1.5);  // copied from the observation
}

TEST_CASE("empty-graph flow tracks the deterministic mean field") {
  SystemSpec spec = testsupport::generic_two_cluster(200, 4, 4);
  spec.topology.E.setZero();
  for (auto& c : spec.clusters) {
    c.Sigma.setZero();
    c.init_cov.setZero();
  }
  validate(spec);
  Solved s(spec);
  const NoiseBundle noise = draw_noise(s.spec, 1, 1);
  const TrajectoryBundle cent = simulate_centralized(s.spec, s.d, s.sol, noise);
  const auto [dist, trace] = simulate_distributed(s.spec, s.d, s.sol, noise);
  (void)dist;
  for (int k = 0; k <= 200; k += 25) {
    for (int q = 0; q < 2; ++q) {
      CHECK((trace.est[0][k].col(q) - cent.xK[0][k]).cwiseAbs().maxCoeff() <=
            1e-10);
    }
  }

  // against a 10x finer reference of the same flow
  SystemSpec fine_spec = spec;
  fine_spec.steps = 2000;
  Solved fine(fine_spec);
  const NoiseBundle fine_noise = draw_noise(fine.spec, 1, 1);
  const auto [fd, fine_trace] =
      simulate_distributed(fine.spec, fine.d, fine.sol, fine_noise);
  (void)fd;
  double max_diff = 0.0;
  for (int k = 0; k <= 200; k += 10) {
    max_diff = std::max(max_diff,
                        (trace.est[0][k].col(0) -
                         fine_trace.est[0][10 * k].col(0))
                            .cwiseAbs()
                            .maxCoeff());
  }
  CHECK(max_diff <= 5e-3);  // O(h) against the refined grid
  CHECK(max_diff > 0.0);
}

TEST_CASE("estimation errors: exactness and grid checks") {
  SUBCASE("complete graph has zero error") {
    Solved s(testsupport::complete_graph_two_cluster(100, 3, 2));
    const NoiseBundle noise = draw_noise(s.spec, 4, 5);
    const auto [bundle, trace] =
        simulate_distributed(s.spec, s.d, s.sol, noise);
    const EstimationErrorSeries errs = estimation_errors(bundle, trace);
    CHECK(errs.mse_check.maxCoeff() == 0.0);
  }
  SUBCASE("deterministic instances sit at the roundoff floor") {
    SystemSpec spec = testsupport::generic_two_cluster(100, 5, 5);
    for (auto& c : spec.clusters) {
      c.Sigma.setZero();
      c.init_cov.setZero();
    }
    validate(spec);
    Solved s(spec);
    const NoiseBundle noise = draw_noise(s.spec, 2, 7);
    const auto [bundle, trace] =
        simulate_distributed(s.spec, s.d, s.sol, noise);
    const EstimationErrorSeries errs = estimation_errors(bundle, trace);
    CHECK(errs.mse_check.maxCoeff() <= 1e-20);
  }
  SUBCASE("grid mismatch is rejected") {
    Solved s(testsupport::generic_two_cluster(50));
    const NoiseBundle noise = draw_noise(s.spec, 2, 7);
    const auto [bundle, trace] =
        simulate_distributed(s.spec, s.d, s.sol, noise);
    EstimatorTrace broken = trace;
    broken.steps = 49;
    CHECK_THROWS_AS(estimation_errors(bundle, broken), ValidationError);
  }
}

TEST_CASE("estimation error decays at the mean-field rate") {
  // Quadrupling cluster sizes should cut the mean-square error ~4x.
  std::vector<std::pair<double, double>> points;
  for (int count : {4, 16, 64}) {
    Solved s(testsupport::sweep_base(60, count));
    RunOptions opt;
    opt.paths = 400;
    opt.seed = 99;
    opt.threads = 1;
    const CompareReport rep = run_compare(s.spec, opt);
    points.push_back({double(count), rep.sup_err_total});
  }
  const SlopeFit fit = fit_loglog_slope(points);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.4));
}

TEST_CASE("estimates and realized mean fields stay mean-square bounded") {
  std::vector<double> est_stats, field_stats;
  for (int count : {4, 16, 64}) {
    Solved s(testsupport::sweep_base(60, count));
    const int paths = 200;
    const NoiseBundle noise = draw_noise(s.spec, paths, 31);
    const auto [bundle, trace] =
        simulate_distributed(s.spec, s.d, s.sol, noise);
    double sup_est = 0.0, sup_field = 0.0;
    for (int k = 0; k <= s.spec.steps; ++k) {
      double mean_est = 0.0, mean_field = 0.0;
      for (int p = 0; p < paths; ++p) {
        for (int q = 0; q < 2; ++q) {
          mean_est += trace.est[p][k].col(q).squaredNorm();
        }
        mean_field += bundle.xK[p][k].squaredNorm();
      }
      sup_est = std::max(sup_est, mean_est / paths);
      sup_field = std::max(sup_field, mean_field / paths);
    }
    est_stats.push_back(sup_est);
    field_stats.push_back(sup_field);
  }
  for (const auto& stats : {est_stats, field_stats}) {
    const double lo = *std::min_element(stats.begin(), stats.end());
    const double hi = *std::max_element(stats.begin(), stats.end());
    CHECK((hi - lo) / hi < 0.2);
  }
}
