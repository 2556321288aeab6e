#pragma once

// Exact moments and cumulants of linear statistics S_f = sum_i f_i over a
// determinantal configuration, plus two independent oracles (a Fredholm
// determinant in quad precision and an L-ensemble pmf enumeration).
//
// Site-vector overloads take f_i already evaluated on the kernel's sites.

#include <complex>
#include <span>
#include <vector>

#include "dpplab/kernel.hpp"
#include "dpplab/spectral.hpp"
#include "dpplab/test_function.hpp"

namespace dpp {

inline constexpr int kMaxCumulantOrder = 8;

struct CumulantTable {
  // values[n - 1] = C_n; normalized[n - 1] = C_n / C_2^{n/2} for n >= 3, NaN below.
  std::vector<double> values;
  std::vector<double> normalized;

  int n_max() const { return static_cast<int>(values.size()); }
  double c(int n) const { return values[static_cast<std::size_t>(n - 1)]; }
  double c_norm(int n) const { return normalized[static_cast<std::size_t>(n - 1)]; }
};

double rho_n(const MatrixKernel& k, std::span<const long> sites);

double mean_Sf(const MatrixKernel& k, std::span<const double> f);
double mean_Sf(const MatrixKernel& k, const TestFunction& f, double L);

double var_Sf(const MatrixKernel& k, std::span<const double> f);
double var_Sf(const MatrixKernel& k, const TestFunction& f, double L);

// L ∫ |f^(k)|^2 m(k / L) dk over |k| <= L/2 when f has a closed-form
// transform; otherwise (1/N) sum_q |F_q|^2 m(q / N) from the site vector on
// the N-site torus. Throws MissingFourier when neither route is available.
double var_spectral(const SpectralFunction& s, const TestFunction& f, double L, long n_sites);

CumulantTable cumulant_table(const MatrixKernel& k, std::span<const double> f, int n_max);
CumulantTable cumulant_table(const MatrixKernel& k, const TestFunction& f, double L, int n_max);

// log det(I + (e^{itf} - 1) K), sum of principal logs of the LU pivots.
std::complex<double> charfn_logdet(const MatrixKernel& k, std::span<const double> f, double t);
std::complex<double> charfn_logdet(const MatrixKernel& k, const TestFunction& f, double L, double t);
// Same computation carried in __float128 for finite-difference work.
std::complex<__float128> charfn_logdet_quad(const MatrixKernel& k, std::span<const double> f,
                                            double t);

struct SubsetDistribution {
  int n_sites = 0;
  // prob[mask] = P(configuration == {i : bit i of mask set}).
  std::vector<double> prob;
  bool kernel_at_one = false;
  // Largest eigenvalue shift introduced by clipping into [0, 1 - 1e-12].
  double clip_perturbation = 0.0;
};

inline constexpr int kMaxBruteForceSites = 12;

SubsetDistribution brute_force_distribution(const MatrixKernel& k);

// Cumulants C_1..C_{n_max} of S_f under an enumerated pmf.
std::vector<double> pmf_cumulants(const SubsetDistribution& d, std::span<const double> f, int n_max);

struct Moments {
  // raw[r - 1] = E X^r, central[r - 1] = E (X - EX)^r.
  std::vector<double> raw;
  std::vector<double> central;
};

Moments cumulants_to_moments(std::span<const double> cumulants);
Moments cumulants_to_moments(const CumulantTable& c);

}  // namespace dpp
