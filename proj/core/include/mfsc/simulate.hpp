#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mfsc/control.hpp"
#include "mfsc/estimator.hpp"
#include "mfsc/model.hpp"
#include "mfsc/noise.hpp"
#include "mfsc/riccati.hpp"

namespace mfsc {

enum class Regime { centralized, distributed, openloop };

// Full per-path trajectories; only small runs should record these. Mean
// fields are always recomputed from agent states, never integrated as a
// separate system.
struct TrajectoryBundle {
  Regime regime = Regime::centralized;
  int paths = 0, agents = 0, steps = 0, n = 0, m = 0, K = 0;
  std::uint64_t seed = 0;

  std::vector<std::vector<Eigen::MatrixXd>> x;   // [path][k], n x N, k=0..steps
  std::vector<std::vector<Eigen::MatrixXd>> u;   // [path][k], m x N, k=0..steps-1
  std::vector<std::vector<Eigen::VectorXd>> xK;  // [path][k], nK

  // Local cluster mean field x^K_q recomputed from states.
  Eigen::VectorXd local_mean(int path, int k, int q,
                             const SystemSpec& spec) const;
};

// Per-cluster estimates of the global mean field along distributed runs.
struct EstimatorTrace {
  int paths = 0, steps = 0, K = 0, nK = 0;
  std::vector<std::vector<Eigen::MatrixXd>> est;  // [path][k], nK x K (col q)
};

// What a kernel pass should compute. Error series and Lemma-3 statistics
// require the corresponding regimes to run.
struct KernelFlags {
  bool centralized = true;
  bool distributed = true;
  bool error_series = false;  // per-step |xi_check|^2 (and |xi_hat|^2 when coupled)
  bool lemma3 = false;        // per-step deviation stats between regimes
};

struct RegimeCost {
  double j_soc = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  Eigen::VectorXd j_agent;  // per-agent cost, length N
};

struct PathResult {
  RegimeCost cent;
  RegimeCost dist;
  // max over agents and grid nodes of |zeta_hat - zeta_check| and
  // |v_hat - v_check| (filled when lemma3 requested)
  double zeta_max_dev = 0.0;
  double v_max_dev = 0.0;
  // (steps+1) x K squared estimation errors (filled when error_series
  // requested); err_hat additionally needs the centralized regime
  Eigen::MatrixXd err_check;
  Eigen::MatrixXd err_hat;
};

// Per-path destinations for trajectory recording; any pointer may be null.
struct TrajectoryWriters {
  std::vector<Eigen::MatrixXd>* cent_x = nullptr;
  std::vector<Eigen::MatrixXd>* cent_u = nullptr;
  std::vector<Eigen::VectorXd>* cent_xK = nullptr;
  std::vector<Eigen::MatrixXd>* dist_x = nullptr;
  std::vector<Eigen::MatrixXd>* dist_u = nullptr;
  std::vector<Eigen::VectorXd>* dist_xK = nullptr;
  std::vector<Eigen::MatrixXd>* est = nullptr;
};

// Supplies the open-loop control matrix (m x N) for a step of one path.
using ControlsForStep = std::function<Eigen::MatrixXd(int step)>;

// Euler-Maruyama kernel over the Riccati grid. Both feedback regimes step
// through identical arithmetic; they differ only in the mean-field vector
// fed to the gains, so equal estimates yield bitwise-equal trajectories.
class Simulator {
 public:
  Simulator(const SystemSpec& spec, const DerivedMatrices& derived,
            const RiccatiSolution& riccati);

  PathResult run_path(const NoiseBundle& noise, int path,
                      const KernelFlags& flags,
                      TrajectoryWriters* writers = nullptr) const;

  // Open-loop pass: externally supplied controls, same stepping and cost
  // accumulation as the feedback regimes.
  RegimeCost run_openloop_path(const NoiseBundle& noise, int path,
                               const ControlsForStep& controls,
                               TrajectoryWriters* writers = nullptr) const;

  const GainSchedule& gains() const { return gains_; }
  const ClosedLoopMatrices& closed_loop() const { return closed_loop_; }

 private:
  const SystemSpec& spec_;
  const DerivedMatrices& derived_;
  GainSchedule gains_;
  ClosedLoopMatrices closed_loop_;
};

// Spec-level wrappers; all paths of the bundle are recorded.
TrajectoryBundle simulate_centralized(const SystemSpec& spec,
                                      const DerivedMatrices& derived,
                                      const RiccatiSolution& riccati,
                                      const NoiseBundle& noise);

std::pair<TrajectoryBundle, EstimatorTrace> simulate_distributed(
    const SystemSpec& spec, const DerivedMatrices& derived,
    const RiccatiSolution& riccati, const NoiseBundle& noise);

// One control sequence (steps entries of m x N) applied to every path.
// Throws ValidationError on shape mismatch.
TrajectoryBundle simulate_openloop(const SystemSpec& spec,
                                   const DerivedMatrices& derived,
                                   const std::vector<Eigen::MatrixXd>& controls,
                                   const NoiseBundle& noise);

}  // namespace mfsc
