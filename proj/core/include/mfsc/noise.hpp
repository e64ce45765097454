#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mfsc/model.hpp"

namespace mfsc {

// Counter-based Gaussian source: every draw is a pure function of
// (seed, path, agent, step, component, purpose), so results are identical
// for any evaluation order and any worker count. Brownian increments are
// N(0, h) with h = T/steps; initial states are drawn from the cluster's
// (init_mean, init_cov) law.
class NoiseBundle {
 public:
  enum class Purpose : std::uint64_t { increment = 1, initial = 2 };

  NoiseBundle(const SystemSpec& spec, std::uint64_t seed, int paths);

  std::uint64_t seed() const { return seed_; }
  int paths() const { return paths_; }
  int steps() const { return steps_; }
  int agents() const { return agents_; }
  int noise_dim() const { return dw_; }
  double dt() const { return dt_; }

  // Unit-variance normal draw for the given counter tuple.
  double normal(int path, int agent, int step, int component,
                Purpose purpose) const;

  // d_w-vector of N(0, h) Brownian increments.
  void increment(int path, int agent, int step,
                 Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd increment(int path, int agent, int step) const;

  // Initial state of one agent: init_mean_q + sqrt(init_cov_q) * z.
  Eigen::VectorXd initial_state(int path, int agent) const;

 private:
  std::uint64_t seed_ = 0;
  int paths_ = 0;
  int steps_ = 0;
  int agents_ = 0;
  int dw_ = 0;
  int n_ = 0;
  double dt_ = 0.0;
  double sqrt_dt_ = 0.0;
  std::vector<int> cluster_of_;             // agent -> cluster
  std::vector<Eigen::VectorXd> init_mean_;  // per cluster
  std::vector<Eigen::MatrixXd> sqrt_cov_;   // symmetric PSD square root
};

// Spec-level constructor name; paths >= 1.
NoiseBundle draw_noise(const SystemSpec& spec, int paths, std::uint64_t seed);

}  // namespace mfsc
