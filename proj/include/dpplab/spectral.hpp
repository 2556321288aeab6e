#pragma once

// Spectral functions (symbols) of translation-invariant lattice kernels.
//
// The frequency variable t lives on the circle [-1/2, 1/2) (lattice Z, or the
// discrete torus Z_N once sampled). A symbol is admissible when 0 <= A(t) <= 1
// everywhere; that is the spectral form of 0 <= K <= Id.

#include <span>
#include <string>
#include <vector>

namespace dpp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// Sort, reject overlaps (MalformedSpectral), merge intervals that share an endpoint.
std::vector<Interval> normalize_intervals(std::vector<Interval> intervals);

// |B ∩ (B + shift)| on the real line for a normalized interval set B.
double shifted_overlap(std::span<const Interval> set, double shift);

// |B| - |B ∩ (B + lambda)| on the real line; no periodic wrap.
double interval_m_lambda(std::span<const Interval> set, double lambda);

class SpectralFunction {
 public:
  enum class Kind { interval_union, tabulated, triangle };

  // Indicator of a union of closed intervals inside [-1/2, 1/2].
  static SpectralFunction intervals(std::vector<Interval> set);
  // Piecewise-linear symbol through (freq, value); freq strictly increasing
  // inside [-1/2, 1/2]; interpolation wraps around the circle.
  static SpectralFunction tabulated(std::vector<double> freq, std::vector<double> values);
  // Constant symbol; value 1/2 gives the independent Bernoulli(1/2) field.
  static SpectralFunction flat(double value);
  // Discrete sine kernel of density rho: indicator of [-rho/2, rho/2].
  static SpectralFunction sine(double rho);
  // max(0, 1 - |2t|).
  static SpectralFunction triangle();
  // Union of [n, n + n^-beta], n = 1..n_max, mapped affinely onto [0, 1/2].
  static SpectralFunction scaled_beta_union(double beta, int n_max);

  double operator()(double t) const;

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  std::string describe() const;
  double total_mass() const { return total_mass_; }

  std::span<const Interval> interval_set() const { return intervals_; }
  std::span<const double> grid() const { return grid_; }
  std::span<const double> grid_values() const { return values_; }

  // Below this lambda the truncated family no longer follows its power law.
  // Zero for symbols that are not truncations of an infinite family.
  double resolution_floor() const { return resolution_floor_; }

  // Samples A((j - floor(n/2)) / n), j = 0..n-1; for even n that is A(j/n - 1/2).
  std::vector<double> sample(std::size_t n) const;

 private:
  SpectralFunction() = default;
  void finish();

  Kind kind_ = Kind::interval_union;
  std::string name_;
  std::vector<double> params_;
  std::vector<Interval> intervals_;
  std::vector<double> grid_;
  std::vector<double> values_;
  double total_mass_ = 0.0;
  double resolution_floor_ = 0.0;
};

struct ValidationReport {
  double min_value = 0.0;
  double max_value = 0.0;
  double total_mass = 0.0;
  double sigma2 = 0.0;
  bool in_range = true;
  std::vector<std::string> violations;
};

// Points on the uniform periodic grid used for every non-interval quadrature.
inline constexpr std::size_t kSpectralQuadraturePoints = 8192;

ValidationReport validate_spectral(const SpectralFunction& s);

// ∫ (A - A^2) dt over the circle.
double sigma2(const SpectralFunction& s);

// m(lambda) = ∫ A(k) - A(k) A(k - lambda) dk with periodic wrap.
double m_lambda(const SpectralFunction& s, double lambda);

}  // namespace dpp
