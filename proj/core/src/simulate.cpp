#include "mfsc/simulate.hpp"

#include <sstream>

#include "mfsc/cost.hpp"

namespace mfsc {
namespace {

void check_finite(const Eigen::MatrixXd& x, const char* what, int step) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << what << " produced a non-finite state at step " << step;
    throw SimulationDivergence(msg.str());
  }
}

}  // namespace

Eigen::VectorXd TrajectoryBundle::local_mean(int path, int k, int q,
                                             const SystemSpec& spec) const {
  const int off = spec.agent_offset(q);
  const int Nq = spec.clusters[q].count;
  return x[path][k].middleCols(off, Nq).rowwise().sum() / double(Nq);
}

Simulator::Simulator(const SystemSpec& spec, const DerivedMatrices& derived,
                     const RiccatiSolution& riccati)
    : spec_(spec),
      derived_(derived),
      gains_(build_gains(spec, derived, riccati)),
      closed_loop_(closed_loop_matrices(riccati, derived)) {}

PathResult Simulator::run_path(const NoiseBundle& noise, int path,
                               const KernelFlags& flags,
                               TrajectoryWriters* writers) const {
  const SystemSpec& spec = spec_;
  const DerivedMatrices& d = derived_;
  const int n = d.n, m = d.m, K = d.K, N = d.N, dw = d.dw;
  const int nK = n * K;
  const int steps = spec.steps;
  const double h = spec.dt();
  const bool cen = flags.centralized;
  const bool dis = flags.distributed;

  PathResult out;
  if (cen) out.cent.j_agent = Eigen::VectorXd::Zero(N);
  if (dis) out.dist.j_agent = Eigen::VectorXd::Zero(N);
  if (flags.error_series && dis) {
    out.err_check = Eigen::MatrixXd::Zero(steps + 1, K);
    if (cen) out.err_hat = Eigen::MatrixXd::Zero(steps + 1, K);
  }

  // Common initial states and common per-step increments couple the
  // regimes pathwise.
  Eigen::MatrixXd x0(n, N);
  for (int a = 0; a < N; ++a) x0.col(a) = noise.initial_state(path, a);

  Eigen::MatrixXd xc, uc, xd, ud, est;
  Eigen::VectorXd xKc, xKd;
  Eigen::MatrixXd dW(dw, N);
  Eigen::MatrixXd drift(n, N);
  Eigen::VectorXd coupling(n), mfctl(m), uKc(m), uKd(m);
  CostWorkspace cost_ws;
  cost_ws.resize(n, m);

  auto compute_xK = [&](const Eigen::MatrixXd& x, Eigen::VectorXd& xK) {
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const int Nq = spec.clusters[q].count;
      xK.segment(q * n, n) =
          x.middleCols(off, Nq).rowwise().sum() / double(Nq);
      off += Nq;
    }
  };

  if (cen) {
    xc = x0;
    uc.resize(m, N);
    xKc.resize(nK);
    compute_xK(xc, xKc);
  }
  if (dis) {
    xd = x0;
    ud.resize(m, N);
    xKd.resize(nK);
    compute_xK(xd, xKd);
    est = init_estimator(spec, d, xKd);
  }

  // u = -F_q x - Fbar_q mf, per cluster block. The mean-field control term
  // is shared by all agents of the cluster.
  auto fill_controls = [&](int k, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& xK,
                           const Eigen::MatrixXd* estimates,
                           Eigen::MatrixXd& u) {
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const int Nq = spec.clusters[q].count;
      if (estimates != nullptr) {
        mfctl.noalias() = gains_.Fbar[k][q] * estimates->col(q);
      } else {
        mfctl.noalias() = gains_.Fbar[k][q] * xK;
      }
      u.middleCols(off, Nq).noalias() = -(gains_.F[k][q] * x.middleCols(off, Nq));
      u.middleCols(off, Nq).colwise() -= mfctl;
      off += Nq;
    }
  };

  // x <- x + h (A_q x + B_q u + Gbar_q xK) + Sigma_q dW
  auto advance = [&](Eigen::MatrixXd& x, const Eigen::MatrixXd& u,
                     const Eigen::VectorXd& xK, int k, const char* regime) {
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const ClusterSpec& c = spec.clusters[q];
      const int Nq = c.count;
      coupling.noalias() = d.Gbar[q] * xK;
      auto xb = x.middleCols(off, Nq);
      auto db = drift.middleCols(off, Nq);
      db.noalias() = c.A * xb;
      db.noalias() += c.B * u.middleCols(off, Nq);
      db.colwise() += coupling;
      xb += h * db;
      xb.noalias() += c.Sigma * dW.middleCols(off, Nq);
      off += Nq;
    }
    check_finite(x, regime, k + 1);
  };

  auto record_states = [&](int k) {
    if (writers == nullptr) return;
    if (cen) {
      if (writers->cent_x) (*writers->cent_x)[k] = xc;
      if (writers->cent_xK) (*writers->cent_xK)[k] = xKc;
    }
    if (dis) {
      if (writers->dist_x) (*writers->dist_x)[k] = xd;
      if (writers->dist_xK) (*writers->dist_xK)[k] = xKd;
      if (writers->est) (*writers->est)[k] = est;
    }
  };

  auto record_errors = [&](int k) {
    if (!(flags.error_series && dis)) return;
    for (int q = 0; q < K; ++q) {
      out.err_check(k, q) = (xKd - est.col(q)).squaredNorm();
      if (cen) out.err_hat(k, q) = (xKc - est.col(q)).squaredNorm();
    }
  };

  auto lemma3_step = [&](int k, bool with_controls) {
    if (!(flags.lemma3 && cen && dis)) return;
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const int Nq = spec.clusters[q].count;
      if (with_controls) {
        uKc = uc.middleCols(off, Nq).rowwise().sum() / double(Nq);
        uKd = ud.middleCols(off, Nq).rowwise().sum() / double(Nq);
      }
      for (int i = 0; i < Nq; ++i) {
        const int a = off + i;
        const double zdev =
            ((xc.col(a) - xKc.segment(q * n, n)) -
             (xd.col(a) - xKd.segment(q * n, n)))
                .norm();
        out.zeta_max_dev = std::max(out.zeta_max_dev, zdev);
        if (with_controls) {
          const double vdev =
              ((uc.col(a) - uKc) - (ud.col(a) - uKd)).norm();
          out.v_max_dev = std::max(out.v_max_dev, vdev);
        }
      }
      off += Nq;
    }
  };

  record_states(0);
  record_errors(0);

  for (int k = 0; k < steps; ++k) {
    if (cen) {
      fill_controls(k, xc, xKc, nullptr, uc);
      accumulate_cost_step(spec, d, xc, &uc, xKc, h, false, out.cent.j1,
                           out.cent.j2, out.cent.j_agent, cost_ws);
    }
    if (dis) {
      fill_controls(k, xd, xKd, &est, ud);
      accumulate_cost_step(spec, d, xd, &ud, xKd, h, false, out.dist.j1,
                           out.dist.j2, out.dist.j_agent, cost_ws);
    }
    lemma3_step(k, true);
    if (writers != nullptr) {
      if (cen && writers->cent_u) (*writers->cent_u)[k] = uc;
      if (dis && writers->dist_u) (*writers->dist_u)[k] = ud;
    }

    for (int a = 0; a < N; ++a) {
      noise.increment(path, a, k, dW.col(a));
    }
    if (cen) {
      advance(xc, uc, xKc, k, "centralized simulation");
      compute_xK(xc, xKc);
    }
    if (dis) {
      advance(xd, ud, xKd, k, "distributed simulation");
      compute_xK(xd, xKd);
      for (int q = 0; q < K; ++q) {
        step_estimator(est.col(q), q, spec, d, closed_loop_, k, xKd);
      }
    }
    record_states(k + 1);
    record_errors(k + 1);
  }

  // Terminal cost and terminal deviation check (no controls at T).
  if (cen) {
    accumulate_cost_step(spec, d, xc, nullptr, xKc, 1.0, true, out.cent.j1,
                         out.cent.j2, out.cent.j_agent, cost_ws);
    out.cent.j_soc = out.cent.j_agent.sum();
  }
  if (dis) {
    accumulate_cost_step(spec, d, xd, nullptr, xKd, 1.0, true, out.dist.j1,
                         out.dist.j2, out.dist.j_agent, cost_ws);
    out.dist.j_soc = out.dist.j_agent.sum();
  }
  lemma3_step(steps, false);
  return out;
}

RegimeCost Simulator::run_openloop_path(const NoiseBundle& noise, int path,
                                        const ControlsForStep& controls,
                                        TrajectoryWriters* writers) const {
  const SystemSpec& spec = spec_;
  const DerivedMatrices& d = derived_;
  const int n = d.n, m = d.m, K = d.K, N = d.N, dw = d.dw;
  const int steps = spec.steps;
  const double h = spec.dt();

  RegimeCost out;
  out.j_agent = Eigen::VectorXd::Zero(N);

  Eigen::MatrixXd x(n, N);
  for (int a = 0; a < N; ++a) x.col(a) = noise.initial_state(path, a);
  Eigen::VectorXd xK(n * K);
  Eigen::MatrixXd dW(dw, N);
  Eigen::MatrixXd drift(n, N);
  Eigen::VectorXd coupling(n);
  CostWorkspace cost_ws;
  cost_ws.resize(n, m);

  auto compute_xK = [&]() {
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const int Nq = spec.clusters[q].count;
      xK.segment(q * n, n) =
          x.middleCols(off, Nq).rowwise().sum() / double(Nq);
      off += Nq;
    }
  };
  compute_xK();

  if (writers != nullptr) {
    if (writers->cent_x) (*writers->cent_x)[0] = x;
    if (writers->cent_xK) (*writers->cent_xK)[0] = xK;
  }

  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXd u = controls(k);
    if (u.rows() != m || u.cols() != N) {
      throw ValidationError("open-loop control matrix has wrong shape");
    }
    accumulate_cost_step(spec, d, x, &u, xK, h, false, out.j1, out.j2,
                         out.j_agent, cost_ws);
    if (writers != nullptr && writers->cent_u) (*writers->cent_u)[k] = u;

    for (int a = 0; a < N; ++a) noise.increment(path, a, k, dW.col(a));
    int off = 0;
    for (int q = 0; q < K; ++q) {
      const ClusterSpec& c = spec.clusters[q];
      const int Nq = c.count;
      coupling.noalias() = d.Gbar[q] * xK;
      auto xb = x.middleCols(off, Nq);
      auto db = drift.middleCols(off, Nq);
      db.noalias() = c.A * xb;
      db.noalias() += c.B * u.middleCols(off, Nq);
      db.colwise() += coupling;
      xb += h * db;
      xb.noalias() += c.Sigma * dW.middleCols(off, Nq);
      off += Nq;
    }
    check_finite(x, "open-loop simulation", k + 1);
    compute_xK();
    if (writers != nullptr) {
      if (writers->cent_x) (*writers->cent_x)[k + 1] = x;
      if (writers->cent_xK) (*writers->cent_xK)[k + 1] = xK;
    }
  }
  accumulate_cost_step(spec, d, x, nullptr, xK, 1.0, true, out.j1, out.j2,
                       out.j_agent, cost_ws);
  out.j_soc = out.j_agent.sum();
  return out;
}

namespace {

TrajectoryBundle make_bundle(Regime regime, const SystemSpec& spec,
                             const DerivedMatrices& d,
                             const NoiseBundle& noise) {
  TrajectoryBundle b;
  b.regime = regime;
  b.paths = noise.paths();
  b.agents = d.N;
  b.steps = spec.steps;
  b.n = d.n;
  b.m = d.m;
  b.K = d.K;
  b.seed = noise.seed();
  b.x.assign(b.paths, std::vector<Eigen::MatrixXd>(b.steps + 1));
  b.u.assign(b.paths, std::vector<Eigen::MatrixXd>(b.steps));
  b.xK.assign(b.paths, std::vector<Eigen::VectorXd>(b.steps + 1));
  return b;
}

}  // namespace

TrajectoryBundle simulate_centralized(const SystemSpec& spec,
                                      const DerivedMatrices& derived,
                                      const RiccatiSolution& riccati,
                                      const NoiseBundle& noise) {
  Simulator sim(spec, derived, riccati);
  TrajectoryBundle bundle =
      make_bundle(Regime::centralized, spec, derived, noise);
  KernelFlags flags;
  flags.centralized = true;
  flags.distributed = false;
  for (int p = 0; p < noise.paths(); ++p) {
    TrajectoryWriters w;
    w.cent_x = &bundle.x[p];
    w.cent_u = &bundle.u[p];
    w.cent_xK = &bundle.xK[p];
    sim.run_path(noise, p, flags, &w);
  }
  return bundle;
}

std::pair<TrajectoryBundle, EstimatorTrace> simulate_distributed(
    const SystemSpec& spec, const DerivedMatrices& derived,
    const RiccatiSolution& riccati, const NoiseBundle& noise) {
  Simulator sim(spec, derived, riccati);
  TrajectoryBundle bundle =
      make_bundle(Regime::distributed, spec, derived, noise);
  EstimatorTrace trace;
  trace.paths = noise.paths();
  trace.steps = spec.steps;
  trace.K = derived.K;
  trace.nK = derived.n * derived.K;
  trace.est.assign(trace.paths,
                   std::vector<Eigen::MatrixXd>(trace.steps + 1));

  KernelFlags flags;
  flags.centralized = false;
  flags.distributed = true;
  for (int p = 0; p < noise.paths(); ++p) {
    TrajectoryWriters w;
    w.dist_x = &bundle.x[p];
    w.dist_u = &bundle.u[p];
    w.dist_xK = &bundle.xK[p];
    w.est = &trace.est[p];
    sim.run_path(noise, p, flags, &w);
  }
  return {std::move(bundle), std::move(trace)};
}

TrajectoryBundle simulate_openloop(const SystemSpec& spec,
                                   const DerivedMatrices& derived,
                                   const std::vector<Eigen::MatrixXd>& controls,
                                   const NoiseBundle& noise) {
  if (static_cast<int>(controls.size()) != spec.steps) {
    throw ValidationError("open-loop controls must have one entry per step");
  }
  for (const auto& u : controls) {
    if (u.rows() != derived.m || u.cols() != derived.N) {
      throw ValidationError("open-loop control matrix has wrong shape");
    }
  }
  // The open-loop pass does not consult the gains; a zero-horizon Riccati
  // solve is not needed, so build the simulator pieces directly.
  RiccatiSolution dummy;
  dummy.T = spec.horizon;
  dummy.steps = spec.steps;
  dummy.h = spec.dt();
  dummy.n = derived.n;
  dummy.K = derived.K;
  dummy.P.assign(spec.steps + 1,
                 std::vector<Eigen::MatrixXd>(
                     derived.K, Eigen::MatrixXd::Zero(derived.n, derived.n)));
  dummy.KK.assign(spec.steps + 1, Eigen::MatrixXd::Zero(
                                      derived.n * derived.K,
                                      derived.n * derived.K));
  Simulator sim(spec, derived, dummy);

  TrajectoryBundle bundle = make_bundle(Regime::openloop, spec, derived, noise);
  for (int p = 0; p < noise.paths(); ++p) {
    TrajectoryWriters w;
    w.cent_x = &bundle.x[p];
    w.cent_u = &bundle.u[p];
    w.cent_xK = &bundle.xK[p];
    sim.run_openloop_path(
        noise, p, [&](int k) { return controls[k]; }, &w);
  }
  return bundle;
}

}  // namespace mfsc
