#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mfsc/control.hpp"
#include "mfsc/csv.hpp"
#include "mfsc/harness.hpp"
#include "support/instances.hpp"

using namespace mfsc;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mfsc_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("loglog slope fit on exact power laws") {
  SUBCASE("identity") {
    const SlopeFit fit = fit_loglog_slope({{1, 1}, {2, 2}, {4, 4}, {8, 8}});
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("reciprocal") {
    const SlopeFit fit =
        fit_loglog_slope({{1, 1}, {2, 0.5}, {4, 0.25}, {8, 0.125}});
    CHECK(std::abs(fit.slope + 1.0) <= 1e-12);
  }
  SUBCASE("inverse square root with multiplicative noise") {
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> normal(0.0, 0.05);
    std::vector<std::pair<double, double>> pts;
    for (double x : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
      pts.push_back({x, 3.0 / std::sqrt(x) * std::exp(normal(rng))});
    }
    const SlopeFit fit = fit_loglog_slope(pts);
    CHECK(std::abs(fit.slope + 0.5) <= 0.1);
  }
  SUBCASE("contract violations") {
    CHECK_THROWS_AS(fit_loglog_slope({{1, 1}, {2, 2}}), ValidationError);
    CHECK_THROWS_AS(fit_loglog_slope({{1, 1}, {2, -2}, {3, 3}}),
                    ValidationError);
    CHECK_THROWS_AS(fit_loglog_slope({{0, 1}, {2, 2}, {3, 3}}),
                    ValidationError);
  }
}

TEST_CASE("csv cells round-trip doubles exactly") {
  for (double v : {0.1, std::tanh(1.0), 1.0 / 3.0, 1e-300, -2.5e17}) {
    CHECK(std::stod(csv_fmt(v)) == v);
  }
}

TEST_CASE("config hash is stable and content-sensitive") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
  CHECK(fnv1a64("abc") == fnv1a64("abc"));
}

TEST_CASE("complete communication graph closes the cost gap") {
  const SystemSpec spec = testsupport::complete_graph_two_cluster(150, 3, 2);
  RunOptions opt;
  opt.paths = 50;
  opt.seed = 3;
  const CompareReport rep = run_compare(spec, opt);
  CHECK(std::abs(rep.gap_per_agent) <= 1e-10);
  CHECK(rep.sup_err_total == 0.0);
}

TEST_CASE("self-observing singleton agent closes the gap") {
  const SystemSpec spec = testsupport::tanh_instance(100, 1, 0.3, 0.5);
  RunOptions opt;
  opt.paths = 40;
  opt.seed = 5;
  const CompareReport rep = run_compare(spec, opt);
  CHECK(std::abs(rep.gap_per_agent) <= 1e-10);
}

TEST_CASE("coupled-run identities hold on a generic instance") {
  const SystemSpec spec = testsupport::generic_two_cluster(300, 4, 3);
  RunOptions opt;
  opt.paths = 60;
  opt.seed = 11;
  const CompareReport rep = run_compare(spec, opt);
  CHECK(rep.zeta_max_dev <= 1e-10);
  CHECK(rep.j2_rel_dev <= 1e-9);
  CHECK(rep.gap_per_agent > 0.0);  // estimator error costs something
}

TEST_CASE("gains are invariant to a common population rescaling") {
  const SystemSpec base = testsupport::generic_two_cluster(80, 3, 5);
  SystemSpec scaled = base;
  for (auto& c : scaled.clusters) c.count *= 16;
  const DerivedMatrices d1 = derive_matrices(base);
  const DerivedMatrices d2 = derive_matrices(scaled);
  CHECK((d1.Qbar - d2.Qbar).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((d1.Hbar - d2.Hbar).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((d1.DK - d2.DK).cwiseAbs().maxCoeff() <= 1e-13);

  const RiccatiSolution s1 = solve_riccati(base, d1);
  const RiccatiSolution s2 = solve_riccati(scaled, d2);
  CHECK((s1.KK[0] - s2.KK[0]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gains move when cluster proportions change") {
  const SystemSpec base = testsupport::generic_two_cluster(80, 3, 5);
  SystemSpec skewed = base;
  skewed.clusters[0].count *= 4;  // non-uniform change
  const RiccatiSolution s1 = solve_riccati(base, derive_matrices(base));
  const RiccatiSolution s2 = solve_riccati(skewed, derive_matrices(skewed));
  CHECK((s1.KK[0] - s2.KK[0]).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("converge requires at least three scales") {
  const SystemSpec spec = testsupport::sweep_base(40);
  RunOptions opt;
  opt.paths = 10;
  CHECK_THROWS_AS(run_converge(spec, {1.0, 2.0}, opt), ValidationError);
}

TEST_CASE("converge produces decaying error rows and slope fits") {
  const SystemSpec spec = testsupport::sweep_base(60, 4);
  RunOptions opt;
  opt.paths = 300;
  opt.seed = 21;
  const ConvergeReport rep = run_converge(spec, {1.0, 4.0, 16.0}, opt);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].C1 == 4);
  CHECK(rep.rows[2].C1 == 64);
  CHECK(rep.rows[2].sup_err_total < rep.rows[0].sup_err_total);
  CHECK(rep.err_fit.slope < -0.5);
}

TEST_CASE("oracle command certifies the generic instance") {
  const SystemSpec spec = testsupport::generic_two_cluster(500, 2, 2);
  RunOptions opt;
  opt.paths = 2;
  opt.seed = 9;
  const OracleReport rep = run_oracle(spec, 20, opt);
  CHECK(rep.all_pass);
  REQUIRE(rep.checks.size() == 6);
  for (const auto& c : rep.checks) {
    INFO(c.name, " dev=", c.deviation, " tol=", c.tolerance);
    CHECK(c.pass);
  }
}

TEST_CASE("validate command reports status through exit codes") {
  TempDir tmp;
  const fs::path good = tmp.path / "good.json";
  std::ofstream(good) << testsupport::minimal_json();
  std::ostringstream out;
  CHECK(run_validate(good.string(), out) == 0);
  CHECK(out.str().find("config ok") != std::string::npos);

  const fs::path bad = tmp.path / "bad.json";
  std::string text = testsupport::minimal_json();
  const auto pos = text.find("\"R\": [[1.0]]");
  text.replace(pos, 12, "\"R\": [[0.0]]");
  std::ofstream(bad) << text;
  std::ostringstream out_bad;
  CHECK(run_validate(bad.string(), out_bad) == 1);
  CHECK(out_bad.str().find("R not positive definite") != std::string::npos);

  std::ostringstream out_missing;
  CHECK(run_validate((tmp.path / "absent.json").string(), out_missing) == 1);
}

TEST_CASE("riccati command writes grids and residuals") {
  TempDir tmp;
  const SystemSpec spec = testsupport::generic_two_cluster(50);
  RunOptions opt;
  opt.out_dir = tmp.path.string();
  opt.dump_gains = true;
  const RiccatiDumpReport rep = run_riccati(spec, opt);
  CHECK(rep.p_residual <= 1e-3);
  CHECK(fs::exists(tmp.path / "riccati_P.csv"));
  CHECK(fs::exists(tmp.path / "riccati_Kbar.csv"));
  CHECK(fs::exists(tmp.path / "riccati_residuals.csv"));
  CHECK(fs::exists(tmp.path / "gains.csv"));
  CHECK(fs::exists(tmp.path / "run_manifest.json"));
  const std::string header = slurp(tmp.path / "riccati_P.csv");
  CHECK(header.rfind("t,cluster,row,col,value", 0) == 0);
}

TEST_CASE("simulate command writes a cost report") {
  TempDir tmp;
  const SystemSpec spec = testsupport::generic_two_cluster(60, 2, 2);
  RunOptions opt;
  opt.paths = 20;
  opt.out_dir = tmp.path.string();
  opt.dump_trajectories = true;
  const SimulateReport rep = run_simulate(spec, "centralized", opt);
  CHECK(rep.regime.j_soc_mean > 0.0);
  CHECK(fs::exists(tmp.path / "cost_report.csv"));
  CHECK(fs::exists(tmp.path / "trajectories.csv"));
  CHECK_THROWS_AS(run_simulate(spec, "nonsense", opt), ValidationError);
}

TEST_CASE("command outputs are byte-identical across worker counts") {
  const SystemSpec spec = testsupport::generic_two_cluster(80, 3, 3);

  TempDir d1, d4;
  RunOptions opt;
  opt.paths = 150;
  opt.seed = 31;

  opt.threads = 1;
  opt.out_dir = d1.path.string();
  run_compare(spec, opt);
  opt.threads = 4;
  opt.out_dir = d4.path.string();
  run_compare(spec, opt);

  for (const char* name :
       {"cost_report.csv", "per_agent.csv", "errors.csv"}) {
    CHECK(slurp(d1.path / name) == slurp(d4.path / name));
  }
  // repeat run with identical options is also byte-identical
  TempDir d1b;
  opt.threads = 1;
  opt.out_dir = d1b.path.string();
  run_compare(spec, opt);
  CHECK(slurp(d1.path / "cost_report.csv") ==
        slurp(d1b.path / "cost_report.csv"));
}
