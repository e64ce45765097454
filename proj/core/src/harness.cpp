#include "mfsc/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mfsc/cost.hpp"
#include "mfsc/csv.hpp"
#include "mfsc/noise.hpp"
#include "mfsc/riccati.hpp"
#include "mfsc/simulate.hpp"
#include "mfsc/threading.hpp"
#include "mfsc/version.hpp"

namespace mfsc {
namespace {

namespace fs = std::filesystem;

std::string out_path(const RunOptions& opt, const std::string& name) {
  return (fs::path(opt.out_dir) / name).string();
}

void ensure_out_dir(const RunOptions& opt) {
  if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
}

void write_manifest(const RunOptions& opt, const std::string& command,
                    int steps) {
  if (opt.out_dir.empty()) return;
  nlohmann::json j;
  j["command"] = command;
  j["config_path"] = opt.config_path;
  std::string bytes;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (in) {
      std::stringstream buf;
      buf << in.rdbuf();
      bytes = buf.str();
    }
  }
  {
    std::ostringstream hash;
    hash << "fnv1a64:" << std::hex << fnv1a64(bytes);
    j["config_hash"] = hash.str();
  }
  j["seed"] = opt.seed;
  j["paths"] = opt.paths;
  j["steps"] = steps;
  j["version"] = kVersion;
  std::ofstream out(out_path(opt, "run_manifest.json"));
  out << j.dump(2) << "\n";
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  const size_t P = values.size();
  if (P == 0) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / double(P);
  if (P > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / double(P - 1) / double(P));
  }
  return out;
}

void write_cost_report_csv(const RunOptions& opt, const CompareReport& rep) {
  if (opt.out_dir.empty()) return;
  CsvFile csv(out_path(opt, "cost_report.csv"),
              {"regime", "statistic", "value", "std_error"});
  auto emit = [&](const std::string& regime, const std::string& stat,
                  double value, std::optional<double> se) {
    csv.row({regime, stat, csv_fmt(value), se ? csv_fmt(*se) : ""});
  };
  for (const auto& [name, s] :
       {std::pair<std::string, const RegimeSummary*>{"centralized",
                                                     &rep.cent},
        {"distributed", &rep.dist}}) {
    emit(name, "j_soc_mean", s->j_soc_mean, s->j_soc_se);
    emit(name, "j_soc_per_agent", s->j_soc_per_agent, std::nullopt);
    emit(name, "j1_mean", s->j1_mean, std::nullopt);
    emit(name, "j2_mean", s->j2_mean, std::nullopt);
  }
  emit("gap", "gap_per_agent", rep.gap_per_agent, rep.gap_se);
  emit("gap", "j2_rel_dev", rep.j2_rel_dev, std::nullopt);
  emit("gap", "zeta_max_dev", rep.zeta_max_dev, std::nullopt);
  emit("gap", "v_max_dev", rep.v_max_dev, std::nullopt);
  emit("value", "v_stated", rep.v_stated, std::nullopt);
  emit("value", "v_corrected", rep.v_corrected, std::nullopt);
}

void write_per_agent_csv(const RunOptions& opt, const CompareReport& rep) {
  if (opt.out_dir.empty()) return;
  CsvFile csv(out_path(opt, "per_agent.csv"),
              {"regime", "agent", "mean_cost"});
  for (int a = 0; a < rep.j_agent_cent.size(); ++a) {
    csv.row({"centralized", csv_fmt(a), csv_fmt(rep.j_agent_cent(a))});
  }
  for (int a = 0; a < rep.j_agent_dist.size(); ++a) {
    csv.row({"distributed", csv_fmt(a), csv_fmt(rep.j_agent_dist(a))});
  }
}

void write_errors_csv(const RunOptions& opt, const SystemSpec& spec,
                      const CompareReport& rep) {
  if (opt.out_dir.empty()) return;
  CsvFile csv(out_path(opt, "errors.csv"),
              {"cluster", "step", "t", "mse_check", "mse_hat"});
  const double h = spec.dt();
  for (int q = 0; q < rep.err_check_series.cols(); ++q) {
    for (int k = 0; k < rep.err_check_series.rows(); ++k) {
      csv.row({csv_fmt(q), csv_fmt(k), csv_fmt(k * h),
               csv_fmt(rep.err_check_series(k, q)),
               csv_fmt(rep.err_hat_series(k, q))});
    }
  }
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

SystemSpec spec_with_overrides(const SystemSpec& spec,
                               const RunOptions& options) {
  SystemSpec out = spec;
  if (options.steps_override > 0) out.steps = options.steps_override;
  validate(out);
  return out;
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) {
    throw ValidationError("slope fit needs at least 3 points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : pts) {
    if (x <= 0.0 || y <= 0.0) {
      throw ValidationError("slope fit needs positive coordinates");
    }
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double n = double(pts.size());
  const double denom = n * sxx - sx * sx;
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  const double mean_y = sy / n;
  for (const auto& [x, y] : pts) {
    const double ly = std::log(y);
    const double pred = fit.intercept + fit.slope * std::log(x);
    ss_res += (ly - pred) * (ly - pred);
    ss_tot += (ly - mean_y) * (ly - mean_y);
  }
  fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

CompareReport run_compare(const SystemSpec& spec_in,
                          const RunOptions& options) {
  const SystemSpec spec = spec_with_overrides(spec_in, options);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution ric = solve_riccati(spec, d);
  const Simulator sim(spec, d, ric);
  const NoiseBundle noise(spec, options.seed, options.paths);

  const int P = options.paths;
  const int N = d.N, K = d.K, steps = spec.steps;

  std::vector<double> jc(P), jd(P), j1c(P), j2c(P), j1d(P), j2d(P);
  std::vector<double> zdev(P), vdev(P);
  const int blocks = block_count(P);
  std::vector<Eigen::MatrixXd> err_check_blk(blocks), err_hat_blk(blocks);
  std::vector<Eigen::VectorXd> agent_cent_blk(blocks), agent_dist_blk(blocks);

  KernelFlags flags;
  flags.centralized = true;
  flags.distributed = true;
  flags.error_series = true;
  flags.lemma3 = true;

  parallel_blocks(P, options.threads, [&](int b, int begin, int end) {
    Eigen::MatrixXd errc = Eigen::MatrixXd::Zero(steps + 1, K);
    Eigen::MatrixXd errh = Eigen::MatrixXd::Zero(steps + 1, K);
    Eigen::VectorXd agc = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd agd = Eigen::VectorXd::Zero(N);
    for (int p = begin; p < end; ++p) {
      const PathResult r = sim.run_path(noise, p, flags);
      jc[p] = r.cent.j_soc;
      jd[p] = r.dist.j_soc;
      j1c[p] = r.cent.j1;
      j2c[p] = r.cent.j2;
      j1d[p] = r.dist.j1;
      j2d[p] = r.dist.j2;
      zdev[p] = r.zeta_max_dev;
      vdev[p] = r.v_max_dev;
      errc += r.err_check;
      errh += r.err_hat;
      agc += r.cent.j_agent;
      agd += r.dist.j_agent;
    }
    err_check_blk[b] = std::move(errc);
    err_hat_blk[b] = std::move(errh);
    agent_cent_blk[b] = std::move(agc);
    agent_dist_blk[b] = std::move(agd);
  });

  CompareReport rep;
  rep.paths = P;
  rep.seed = options.seed;
  rep.agents = N;

  rep.err_check_series = Eigen::MatrixXd::Zero(steps + 1, K);
  rep.err_hat_series = Eigen::MatrixXd::Zero(steps + 1, K);
  rep.j_agent_cent = Eigen::VectorXd::Zero(N);
  rep.j_agent_dist = Eigen::VectorXd::Zero(N);
  for (int b = 0; b < blocks; ++b) {
    rep.err_check_series += err_check_blk[b];
    rep.err_hat_series += err_hat_blk[b];
    rep.j_agent_cent += agent_cent_blk[b];
    rep.j_agent_dist += agent_dist_blk[b];
  }
  rep.err_check_series /= double(P);
  rep.err_hat_series /= double(P);
  rep.j_agent_cent /= double(P);
  rep.j_agent_dist /= double(P);
  rep.sup_err_check = rep.err_check_series.colwise().maxCoeff();
  rep.sup_err_total = rep.sup_err_check.sum();

  const MeanSe mc = mean_se(jc);
  const MeanSe md = mean_se(jd);
  rep.cent.j_soc_mean = mc.mean;
  rep.cent.j_soc_se = mc.se;
  rep.cent.j_soc_per_agent = mc.mean / N;
  rep.cent.j1_mean = mean_se(j1c).mean;
  rep.cent.j2_mean = mean_se(j2c).mean;
  rep.dist.j_soc_mean = md.mean;
  rep.dist.j_soc_se = md.se;
  rep.dist.j_soc_per_agent = md.mean / N;
  rep.dist.j1_mean = mean_se(j1d).mean;
  rep.dist.j2_mean = mean_se(j2d).mean;

  rep.gap_per_path.resize(P);
  for (int p = 0; p < P; ++p) rep.gap_per_path[p] = (jd[p] - jc[p]) / N;
  const MeanSe gap = mean_se(rep.gap_per_path);
  rep.gap_per_agent = gap.mean;
  rep.gap_se = gap.se;

  for (int p = 0; p < P; ++p) {
    rep.zeta_max_dev = std::max(rep.zeta_max_dev, zdev[p]);
    rep.v_max_dev = std::max(rep.v_max_dev, vdev[p]);
  }
  double j2_dev = 0.0;
  for (int p = 0; p < P; ++p) {
    j2_dev = std::max(j2_dev, std::abs(j2d[p] - j2c[p]));
  }
  const double j2_scale = std::max(rep.cent.j2_mean, rep.dist.j2_mean);
  rep.j2_rel_dev = j2_scale > 0.0 ? j2_dev / j2_scale : j2_dev;

  const ValuePair v = value_function(spec, d, ric);
  rep.v_stated = v.stated;
  rep.v_corrected = v.corrected;

  ensure_out_dir(options);
  write_cost_report_csv(options, rep);
  write_per_agent_csv(options, rep);
  if (options.dump_errors || !options.out_dir.empty()) {
    write_errors_csv(options, spec, rep);
  }
  write_manifest(options, "compare", spec.steps);
  return rep;
}

SimulateReport run_simulate(const SystemSpec& spec_in,
                            const std::string& regime,
                            const RunOptions& options) {
  if (regime != "centralized" && regime != "distributed") {
    throw ValidationError("regime must be 'centralized' or 'distributed'");
  }
  const SystemSpec spec = spec_with_overrides(spec_in, options);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution ric = solve_riccati(spec, d);
  const Simulator sim(spec, d, ric);
  const NoiseBundle noise(spec, options.seed, options.paths);

  const int P = options.paths;
  const int N = d.N;
  const bool cen = regime == "centralized";

  std::vector<double> j(P), j1(P), j2(P);
  KernelFlags flags;
  flags.centralized = cen;
  flags.distributed = !cen;

  parallel_blocks(P, options.threads, [&](int, int begin, int end) {
    for (int p = begin; p < end; ++p) {
      const PathResult r = sim.run_path(noise, p, flags);
      const RegimeCost& c = cen ? r.cent : r.dist;
      j[p] = c.j_soc;
      j1[p] = c.j1;
      j2[p] = c.j2;
    }
  });

  SimulateReport rep;
  rep.paths = P;
  const MeanSe ms = mean_se(j);
  rep.regime.j_soc_mean = ms.mean;
  rep.regime.j_soc_se = ms.se;
  rep.regime.j_soc_per_agent = ms.mean / N;
  rep.regime.j1_mean = mean_se(j1).mean;
  rep.regime.j2_mean = mean_se(j2).mean;
  rep.j_soc_per_path = std::move(j);

  const ValuePair v = value_function(spec, d, ric);
  rep.v_stated = v.stated;
  rep.v_corrected = v.corrected;

  ensure_out_dir(options);
  if (!options.out_dir.empty()) {
    CsvFile csv(out_path(options, "cost_report.csv"),
                {"regime", "statistic", "value", "std_error"});
    csv.row({regime, "j_soc_mean", csv_fmt(rep.regime.j_soc_mean),
             csv_fmt(rep.regime.j_soc_se)});
    csv.row({regime, "j_soc_per_agent", csv_fmt(rep.regime.j_soc_per_agent),
             ""});
    csv.row({regime, "j1_mean", csv_fmt(rep.regime.j1_mean), ""});
    csv.row({regime, "j2_mean", csv_fmt(rep.regime.j2_mean), ""});
    csv.row({"value", "v_stated", csv_fmt(rep.v_stated), ""});
    csv.row({"value", "v_corrected", csv_fmt(rep.v_corrected), ""});
  }

  if (options.dump_trajectories && !options.out_dir.empty()) {
    std::vector<std::string> header = {"path", "agent", "step", "t"};
    for (int c = 0; c < d.n; ++c) header.push_back("x" + std::to_string(c));
    for (int c = 0; c < d.m; ++c) header.push_back("u" + std::to_string(c));
    CsvFile csv(out_path(options, "trajectories.csv"), header);

    std::vector<Eigen::MatrixXd> xs(spec.steps + 1), us(spec.steps);
    std::vector<Eigen::VectorXd> xKs(spec.steps + 1);
    std::vector<Eigen::MatrixXd> est(spec.steps + 1);
    for (int p = 0; p < P; ++p) {
      TrajectoryWriters w;
      if (cen) {
        w.cent_x = &xs;
        w.cent_u = &us;
        w.cent_xK = &xKs;
      } else {
        w.dist_x = &xs;
        w.dist_u = &us;
        w.dist_xK = &xKs;
        w.est = &est;
      }
      sim.run_path(noise, p, flags, &w);
      for (int k = 0; k <= spec.steps; ++k) {
        for (int a = 0; a < N; ++a) {
          std::vector<std::string> row = {csv_fmt(p), csv_fmt(a), csv_fmt(k),
                                          csv_fmt(k * spec.dt())};
          for (int c = 0; c < d.n; ++c) row.push_back(csv_fmt(xs[k](c, a)));
          for (int c = 0; c < d.m; ++c) {
            row.push_back(k < spec.steps ? csv_fmt(us[k](c, a)) : "");
          }
          csv.row(row);
        }
      }
    }
  }
  write_manifest(options, "simulate", spec.steps);
  return rep;
}

ConvergeReport run_converge(const SystemSpec& base,
                            const std::vector<double>& scales,
                            const RunOptions& options) {
  if (scales.size() < 3) {
    throw ValidationError("converge needs at least 3 scales");
  }
  ConvergeReport rep;
  for (double s : scales) {
    SystemSpec scaled = base;
    for (auto& c : scaled.clusters) {
      c.count = std::max(1, static_cast<int>(std::llround(c.count * s)));
    }
    RunOptions sub = options;
    sub.out_dir.clear();
    const CompareReport cmp = run_compare(scaled, sub);

    ConvergenceRow row;
    row.scale = s;
    row.C1 = scaled.clusters[0].count;
    for (const auto& c : scaled.clusters) row.C1 = std::min(row.C1, c.count);
    row.agents = cmp.agents;
    row.paths = cmp.paths;
    row.seed = cmp.seed;
    row.gap_per_agent = cmp.gap_per_agent;
    row.gap_se = cmp.gap_se;
    row.sup_err_check = cmp.sup_err_check;
    row.sup_err_total = cmp.sup_err_total;
    rep.rows.push_back(std::move(row));
  }

  std::vector<std::pair<double, double>> err_pts, gap_pts;
  bool gap_ok = true, err_ok = true;
  for (const auto& row : rep.rows) {
    if (row.sup_err_total > 0.0) {
      err_pts.push_back({double(row.C1), row.sup_err_total});
    } else {
      err_ok = false;
    }
    if (row.gap_per_agent > 0.0) {
      gap_pts.push_back({double(row.C1), row.gap_per_agent});
    } else {
      gap_ok = false;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.err_fit = err_ok && err_pts.size() >= 3
                    ? fit_loglog_slope(err_pts)
                    : SlopeFit{nan, nan, nan};
  rep.gap_fit = gap_ok && gap_pts.size() >= 3
                    ? fit_loglog_slope(gap_pts)
                    : SlopeFit{nan, nan, nan};

  ensure_out_dir(options);
  if (!options.out_dir.empty()) {
    const int K = base.K();
    std::vector<std::string> header = {"scale",         "C1",
                                       "N",             "paths",
                                       "seed",          "gap_per_agent",
                                       "gap_se",        "sup_err_total"};
    for (int q = 0; q < K; ++q) {
      header.push_back("sup_err_q" + std::to_string(q));
    }
    CsvFile csv(out_path(options, "converge.csv"), header);
    for (const auto& row : rep.rows) {
      std::vector<std::string> cells = {
          csv_fmt(row.scale),
          csv_fmt(row.C1),
          csv_fmt(row.agents),
          csv_fmt(row.paths),
          csv_fmt(static_cast<unsigned long long>(row.seed)),
          csv_fmt(row.gap_per_agent),
          csv_fmt(row.gap_se),
          csv_fmt(row.sup_err_total)};
      for (int q = 0; q < K; ++q) cells.push_back(csv_fmt(row.sup_err_check(q)));
      csv.row(cells);
    }
    CsvFile slopes(out_path(options, "slopes.csv"),
                   {"quantity", "slope", "intercept", "r2"});
    slopes.row({"est_error_vs_C1", csv_fmt(rep.err_fit.slope),
                csv_fmt(rep.err_fit.intercept), csv_fmt(rep.err_fit.r2)});
    slopes.row({"cost_gap_vs_C1", csv_fmt(rep.gap_fit.slope),
                csv_fmt(rep.gap_fit.intercept), csv_fmt(rep.gap_fit.r2)});
  }
  write_manifest(options, "converge", base.steps);
  return rep;
}

OracleReport run_oracle(const SystemSpec& spec_in, int trials,
                        const RunOptions& options) {
  const SystemSpec spec = spec_with_overrides(spec_in, options);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution ric = solve_riccati(spec, d);
  const StackedSystem sys = stack_system(spec, d);
  const std::vector<Eigen::MatrixXd> stacked =
      solve_stacked_riccati(sys, spec.horizon, spec.steps);
  const OracleComparison cmp = compare_structured_vs_stacked(
      spec, d, ric, sys, stacked, trials, options.seed);

  const int fb_paths = std::max(1, std::min(options.paths, 4));
  const NoiseBundle noise(spec, options.seed, fb_paths);
  const TrajectoryBundle bundle = simulate_centralized(spec, d, ric, noise);
  const FbsdeResiduals fb = fbsde_residual(bundle, spec, d, ric);

  OracleReport rep;
  const double drift_tol = 10.0 * fb.h * fb.h;
  auto add = [&](const std::string& name, double dev, double tol) {
    rep.checks.push_back({name, dev, tol, dev <= tol});
  };
  add("gain_agreement", cmp.max_gain_dev, 1e-6);
  add("value_agreement", cmp.value_rel_dev, 1e-6);
  add("quadratic_form", cmp.max_form_rel_dev, 1e-6);
  add("fbsde_control", fb.control_max, 1e-10);
  add("fbsde_terminal", fb.terminal_max, 1e-10);
  add("fbsde_drift", fb.drift_max, drift_tol);
  rep.all_pass = true;
  for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;

  ensure_out_dir(options);
  if (!options.out_dir.empty()) {
    CsvFile csv(out_path(options, "oracle_report.csv"),
                {"check", "max_deviation", "tolerance", "status"});
    for (const auto& c : rep.checks) {
      csv.row({c.name, csv_fmt(c.deviation), csv_fmt(c.tolerance),
               c.pass ? "pass" : "fail"});
    }
  }
  write_manifest(options, "oracle", spec.steps);
  return rep;
}

int run_validate(const std::string& config_path, std::ostream& out) {
  SystemSpec spec;
  try {
    spec = load_spec_file(config_path);
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
  const std::vector<std::string> warnings = validate(spec);
  const DerivedMatrices d = derive_matrices(spec);

  out << "config ok: K=" << spec.K() << " clusters, N=" << spec.total_agents()
      << " agents, n=" << spec.state_dim << ", m=" << spec.control_dim
      << ", d_w=" << spec.noise_dim << ", T=" << spec.horizon
      << ", steps=" << spec.steps << "\n";
  for (int q = 0; q < spec.K(); ++q) {
    out << "  cluster " << q << " (" << spec.clusters[q].label
        << "): N_q=" << spec.clusters[q].count << ", pi_q=" << d.pi(q)
        << "\n";
  }
  out << "  |G^K|=" << d.GK.norm() << " |Gamma^K|=" << d.GammaK.norm()
      << " |Qbar^K|=" << d.Qbar.norm() << " |Hbar^K|=" << d.Hbar.norm()
      << " |D^K|=" << d.DK.norm() << "\n";
  for (const auto& w : warnings) {
    out << "warning: " << w << "\n";
  }
  return 0;
}

RiccatiDumpReport run_riccati(const SystemSpec& spec_in,
                              const RunOptions& options) {
  const SystemSpec spec = spec_with_overrides(spec_in, options);
  const DerivedMatrices d = derive_matrices(spec);
  const RiccatiSolution ric = solve_riccati(spec, d);
  const RiccatiResiduals res = riccati_residual(ric, spec, d);

  ensure_out_dir(options);
  if (!options.out_dir.empty()) {
    {
      CsvFile csv(out_path(options, "riccati_P.csv"),
                  {"t", "cluster", "row", "col", "value"});
      for (int k = 0; k <= ric.steps; ++k) {
        for (int q = 0; q < d.K; ++q) {
          for (int r = 0; r < d.n; ++r) {
            for (int c = 0; c < d.n; ++c) {
              csv.row({csv_fmt(ric.t(k)), csv_fmt(q), csv_fmt(r), csv_fmt(c),
                       csv_fmt(ric.P[k][q](r, c))});
            }
          }
        }
      }
    }
    {
      CsvFile csv(out_path(options, "riccati_Kbar.csv"),
                  {"t", "cluster", "row", "col", "value"});
      for (int k = 0; k <= ric.steps; ++k) {
        for (int q = 0; q < d.K; ++q) {
          const Eigen::MatrixXd kb = ric.kbar(k, q);
          for (int r = 0; r < kb.rows(); ++r) {
            for (int c = 0; c < kb.cols(); ++c) {
              csv.row({csv_fmt(ric.t(k)), csv_fmt(q), csv_fmt(r), csv_fmt(c),
                       csv_fmt(kb(r, c))});
            }
          }
        }
      }
    }
    {
      CsvFile csv(out_path(options, "riccati_residuals.csv"),
                  {"equation", "max_residual"});
      csv.row({"P", csv_fmt(res.p_max)});
      csv.row({"K", csv_fmt(res.k_max)});
    }
    if (options.dump_gains) {
      const GainSchedule g = build_gains(spec, d, ric);
      CsvFile csv(out_path(options, "gains.csv"),
                  {"cluster", "step", "t", "family", "row", "col", "value"});
      for (int k = 0; k <= ric.steps; ++k) {
        for (int q = 0; q < d.K; ++q) {
          for (int r = 0; r < d.m; ++r) {
            for (int c = 0; c < d.n; ++c) {
              csv.row({csv_fmt(q), csv_fmt(k), csv_fmt(ric.t(k)), "F",
                       csv_fmt(r), csv_fmt(c), csv_fmt(g.F[k][q](r, c))});
            }
            for (int c = 0; c < d.n * d.K; ++c) {
              csv.row({csv_fmt(q), csv_fmt(k), csv_fmt(ric.t(k)), "Fbar",
                       csv_fmt(r), csv_fmt(c), csv_fmt(g.Fbar[k][q](r, c))});
            }
          }
        }
      }
    }
  }
  write_manifest(options, "riccati", spec.steps);
  return {res.p_max, res.k_max};
}

}  // namespace mfsc
