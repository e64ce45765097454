#include "mfsc/noise.hpp"

#include <cmath>

namespace mfsc {
namespace {

// SplitMix64 finalizer; a bijection on 64-bit words with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Top 53 bits -> [0, 1).
inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

NoiseBundle::NoiseBundle(const SystemSpec& spec, std::uint64_t seed,
                         int paths)
    : seed_(seed),
      paths_(paths),
      steps_(spec.steps),
      agents_(spec.total_agents()),
      dw_(spec.noise_dim),
      n_(spec.state_dim),
      dt_(spec.dt()),
      sqrt_dt_(std::sqrt(spec.dt())) {
  if (paths < 1) {
    throw ValidationError("paths must be >= 1");
  }
  cluster_of_.reserve(agents_);
  for (int q = 0; q < spec.K(); ++q) {
    for (int i = 0; i < spec.clusters[q].count; ++i) {
      cluster_of_.push_back(q);
    }
    init_mean_.push_back(spec.clusters[q].init_mean);
    // Symmetric PSD square root; tolerates rank-deficient covariances.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        spec.clusters[q].init_cov);
    Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    sqrt_cov_.push_back(es.eigenvectors() * evals.asDiagonal() *
                        es.eigenvectors().transpose());
  }
}

double NoiseBundle::normal(int path, int agent, int step, int component,
                           Purpose purpose) const {
  std::uint64_t h = seed_ ^ (static_cast<std::uint64_t>(purpose) << 56);
  h = mix64(h ^ static_cast<std::uint64_t>(path));
  h = mix64(h ^ static_cast<std::uint64_t>(agent));
  h = mix64(h ^ static_cast<std::uint64_t>(step));
  h = mix64(h ^ static_cast<std::uint64_t>(component));
  const std::uint64_t a = mix64(h ^ 0xa0761d6478bd642fULL);
  const std::uint64_t b = mix64(h ^ 0xe7037ed1a0b428dbULL);
  const double u1 = 1.0 - to_unit(a);  // (0, 1], keeps log finite
  const double u2 = to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * M_PI * u2);
}

void NoiseBundle::increment(int path, int agent, int step,
                            Eigen::Ref<Eigen::VectorXd> out) const {
  for (int c = 0; c < dw_; ++c) {
    out(c) = sqrt_dt_ * normal(path, agent, step, c, Purpose::increment);
  }
}

Eigen::VectorXd NoiseBundle::increment(int path, int agent, int step) const {
  Eigen::VectorXd out(dw_);
  increment(path, agent, step, out);
  return out;
}

Eigen::VectorXd NoiseBundle::initial_state(int path, int agent) const {
  const int q = cluster_of_[agent];
  Eigen::VectorXd z(n_);
  for (int c = 0; c < n_; ++c) {
    z(c) = normal(path, agent, 0, c, Purpose::initial);
  }
  return init_mean_[q] + sqrt_cov_[q] * z;
}

NoiseBundle draw_noise(const SystemSpec& spec, int paths,
                       std::uint64_t seed) {
  return NoiseBundle(spec, seed, paths);
}

}  // namespace mfsc
