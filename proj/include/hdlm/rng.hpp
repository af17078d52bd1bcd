#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace hdlm {

// Counter-based 64-bit generator: output i is the SplitMix64 finalizer
// applied to key + i * gamma. Every stochastic routine in the library
// takes an explicit seed, so any run can be replayed exactly; use
// derive_seed to split independent streams off one master seed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double next_uniform();

  // Standard normal via Box-Muller. The second draw of each pair is
  // cached, keeping the stream deterministic for a fixed seed.
  double next_gaussian();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic stream split: hash of (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Eigen::VectorXd gaussian_vector(CounterRng& rng, Eigen::Index n);
Eigen::MatrixXd gaussian_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace hdlm
