#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dpp {

double normal_cdf(double z);

// Kolmogorov-Smirnov distance of the empirical law of (x - mu) / sigma to N(0,1).
double ks_normal(std::span<const double> x, double mu, double sigma);

// Same for values on the lattice step * Z, comparing F_n(v) with
// Phi((v + step/2 - mu) / sigma) at every lattice point (continuity correction).
double ks_normal_lattice(std::span<const double> x, double mu, double sigma, double step);

// Common step h with every value in h * Z (to 1e-9 relative), if one exists
// among the nonzero magnitudes.
std::optional<double> lattice_step(std::span<const double> values);

struct SampleMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;   // unbiased
  double skew = 0.0;  // m3 / m2^{3/2}
  double kurt = 0.0;  // m4 / m2^2 - 3
};

SampleMoments sample_moments(std::span<const double> x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Pearson test; cells with expected count below `min_expected` are pooled.
ChiSquare chi_square_test(std::span<const std::size_t> observed, std::span<const double> prob,
                          double min_expected = 5.0);

}  // namespace dpp
