// Command-line harness for the mean-field social control toolkit:
// validation, Riccati solves, controller comparison, convergence studies,
// and brute-force oracle certification.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "mfsc/harness.hpp"
#include "mfsc/model.hpp"
#include "mfsc/version.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 1;
  int paths = 100;
  int threads = 0;
  int steps_override = 0;
  std::string out;
  bool dump_trajectories = false;
  bool dump_errors = false;
  bool dump_gains = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool needs_paths = true) {
  cmd->add_option("--config", args->config, "Path to the JSON config")
      ->required();
  cmd->add_option("--seed", args->seed, "RNG seed");
  if (needs_paths) {
    cmd->add_option("--paths", args->paths, "Monte Carlo paths");
  }
  cmd->add_option("--threads", args->threads,
                  "Worker threads (0 = hardware)");
  cmd->add_option("--steps-override", args->steps_override,
                  "Override the config's grid resolution");
  cmd->add_option("--out", args->out, "Output directory for CSV reports");
  cmd->add_flag("--dump-trajectories", args->dump_trajectories,
                "Write per-agent trajectory CSV");
  cmd->add_flag("--dump-errors", args->dump_errors,
                "Write estimation-error CSV");
  cmd->add_flag("--dump-gains", args->dump_gains, "Write gain schedule CSV");
}

mfsc::RunOptions to_options(const CommonArgs& args) {
  mfsc::RunOptions opt;
  opt.config_path = args.config;
  opt.seed = args.seed;
  opt.paths = args.paths;
  opt.threads = args.threads;
  opt.steps_override = args.steps_override;
  opt.out_dir = args.out;
  opt.dump_trajectories = args.dump_trajectories;
  opt.dump_errors = args.dump_errors;
  opt.dump_gains = args.dump_gains;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field social control toolkit"};
  app.set_version_flag("--version", mfsc::kVersion);
  app.require_subcommand(1);

  CommonArgs validate_args, riccati_args, simulate_args, compare_args,
      converge_args, oracle_args;
  std::string regime = "centralized";
  std::vector<double> scales;
  int trials = 50;

  CLI::App* validate = app.add_subcommand(
      "validate", "Load and validate a config, print a model summary");
  validate->add_option("--config", validate_args.config, "Config path")
      ->required();

  CLI::App* riccati = app.add_subcommand(
      "riccati", "Solve the coupled Riccati system and dump the grids");
  add_common(riccati, &riccati_args, /*needs_paths=*/false);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo evaluation of one controller regime");
  add_common(simulate, &simulate_args);
  simulate->add_option("--regime", regime,
                       "centralized or distributed");

  CLI::App* compare = app.add_subcommand(
      "compare", "Coupled centralized/distributed comparison on common noise");
  add_common(compare, &compare_args);

  CLI::App* converge = app.add_subcommand(
      "converge", "Population sweep: estimation-error and cost-gap slopes");
  add_common(converge, &converge_args);
  converge
      ->add_option("--scales", scales,
                   "Multipliers applied to every cluster count (>= 3)")
      ->required();

  CLI::App* oracle = app.add_subcommand(
      "oracle", "Brute-force stacked certification of the structured solution");
  add_common(oracle, &oracle_args);
  oracle->add_option("--trials", trials, "Random joint states per node");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      return mfsc::run_validate(validate_args.config, std::cout);
    }
    if (riccati->parsed()) {
      const auto spec = mfsc::load_spec_file(riccati_args.config);
      const auto rep = mfsc::run_riccati(spec, to_options(riccati_args));
      std::printf("riccati residuals: P %.3e, K %.3e\n", rep.p_residual,
                  rep.k_residual);
      return 0;
    }
    if (simulate->parsed()) {
      const auto spec = mfsc::load_spec_file(simulate_args.config);
      const auto rep =
          mfsc::run_simulate(spec, regime, to_options(simulate_args));
      std::printf("%s: J_soc = %.6g +- %.2g (per agent %.6g)\n",
                  regime.c_str(), rep.regime.j_soc_mean, rep.regime.j_soc_se,
                  rep.regime.j_soc_per_agent);
      std::printf("value function: stated %.6g, corrected %.6g\n",
                  rep.v_stated, rep.v_corrected);
      return 0;
    }
    if (compare->parsed()) {
      const auto spec = mfsc::load_spec_file(compare_args.config);
      const auto rep = mfsc::run_compare(spec, to_options(compare_args));
      std::printf("centralized J_soc = %.6g +- %.2g\n", rep.cent.j_soc_mean,
                  rep.cent.j_soc_se);
      std::printf("distributed J_soc = %.6g +- %.2g\n", rep.dist.j_soc_mean,
                  rep.dist.j_soc_se);
      std::printf("per-agent gap = %.6g +- %.2g\n", rep.gap_per_agent,
                  rep.gap_se);
      return 0;
    }
    if (converge->parsed()) {
      const auto spec = mfsc::load_spec_file(converge_args.config);
      const auto rep =
          mfsc::run_converge(spec, scales, to_options(converge_args));
      for (const auto& row : rep.rows) {
        std::printf("C1 = %4d: gap/agent = %.6g +- %.2g, sup-t err = %.6g\n",
                    row.C1, row.gap_per_agent, row.gap_se,
                    row.sup_err_total);
      }
      std::printf("slopes: est error %.3f (r2 %.3f), cost gap %.3f (r2 %.3f)\n",
                  rep.err_fit.slope, rep.err_fit.r2, rep.gap_fit.slope,
                  rep.gap_fit.r2);
      return 0;
    }
    if (oracle->parsed()) {
      const auto spec = mfsc::load_spec_file(oracle_args.config);
      const auto rep = mfsc::run_oracle(spec, trials, to_options(oracle_args));
      for (const auto& c : rep.checks) {
        std::printf("%-16s %.3e (tol %.3e) %s\n", c.name.c_str(), c.deviation,
                    c.tolerance, c.pass ? "pass" : "FAIL");
      }
      return rep.all_pass ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
