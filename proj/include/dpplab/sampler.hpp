#pragma once

// Exact sampling from a finite determinantal kernel: independent
// Bernoulli(lambda_j) selection of eigenvectors, then sequential sampling from
// the selected projection with Householder updates of its basis.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpplab/kernel.hpp"

namespace dpp {

struct Configuration {
  std::vector<long> sites;  // sorted site indices of the kernel
  std::uint64_t kernel_id = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

inline constexpr int kReorthoInterval = 32;
inline constexpr double kReorthoTol = 1e-8;

class Sampler {
 public:
  explicit Sampler(const MatrixKernel& k);
  ~Sampler();
  Sampler(Sampler&&) noexcept;

  // Retries once on stream ^ 2^63 after DegenerateProjection.
  Configuration sample(std::uint64_t seed, std::uint64_t stream) const;

  // Number of points of sample(seed, stream), from the selection stage alone.
  long sample_count(std::uint64_t seed, std::uint64_t stream) const;

  const Eigen::VectorXd& eigenvalues() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Configuration sample(const MatrixKernel& k, std::uint64_t seed);

// Sample i uses stream i of base_seed; output order and content do not
// depend on `workers`.
std::vector<Configuration> sample_batch(const MatrixKernel& k, std::size_t n_samples,
                                        std::uint64_t base_seed, int workers = 1);

struct CorrelationEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Fraction of configurations occupying every listed site (order <= 3).
CorrelationEstimate empirical_correlations(std::span<const Configuration> configs,
                                           std::span<const long> sites);

// "seed,site_count,i1,i2,..."
std::string to_csv_line(const Configuration& c);

// Runs fn(i) for i in [0, n) on `workers` threads; fn must write only slot i.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace dpp
