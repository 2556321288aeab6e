#pragma once

// Scaling experiments: exact statistics and Monte Carlo samples of
// S_{f_L} = sum_i f(x_i / L) on a growing grid of L.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dpplab/spectral.hpp"
#include "dpplab/test_function.hpp"

namespace dpp {

struct PerturbationSpec {
  bool enabled = false;
  double epsilon = 0.0;
  double width = 1.0;
};

struct ExperimentSpec {
  SpectralFunction kernel = SpectralFunction::sine(0.5);
  long n_sites = 0;  // fixed torus size; 0 means ceil(window_factor * L)
  double window_factor = 16.0;
  PerturbationSpec perturbation;
  TestFunction statistic = TestFunction::indicator(0.0, 1.0);
  std::vector<double> L_grid;
  std::vector<double> lambda_grid;
  std::size_t n_samples = 10000;
  double mc_max_L = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  int cumulant_order = 4;
  enum class ScanMethod { lattice, spectral } scan_method = ScanMethod::lattice;
  int workers = 1;

  long n_sites_for(double L) const;
  // Sites in the scaled support [L lo, L hi].
  long support_sites(double L) const;
};

inline constexpr double kMarginFactor = 4.0;
inline constexpr double kMinVariance = 1e-6;

// Throws ValidationError naming the offending key.
void validate_spec(const ExperimentSpec& spec);

struct ExactRow {
  double L = 0.0;
  long n_sites = 0;
  double mean = 0.0;
  double var = 0.0;
  double var_spectral = std::numeric_limits<double>::quiet_NaN();  // unperturbed symbol
  std::vector<double> cumulants;  // C_1..C_order; empty when the support is too large
  std::vector<double> c_norm;     // orders 3..order
};

ExactRow exact_row(const ExperimentSpec& spec, double L);

struct CltRow {
  double L = 0.0;
  long n_sites = 0;
  double exact_mean = 0.0;
  double exact_var = 0.0;
  std::vector<double> c_norm;  // normalized cumulants, orders 3..cumulant_order
  double emp_mean = std::numeric_limits<double>::quiet_NaN();
  double emp_var = std::numeric_limits<double>::quiet_NaN();
  double emp_skew = std::numeric_limits<double>::quiet_NaN();
  double emp_kurt = std::numeric_limits<double>::quiet_NaN();
  double ks_dist = std::numeric_limits<double>::quiet_NaN();
  double ks_raw = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool mean_gate = true;
  bool var_gate = true;

  double c3_norm() const;
  double c4_norm() const;
};

struct CltResult {
  std::vector<CltRow> rows;
  // Lattice step of the statistic; 0 when the continuity correction is off.
  double lattice_step = 0.0;
};

CltResult run_clt(const ExperimentSpec& spec);

struct Verdict {
  bool pass = false;
  std::string reason;
  // Largest-L exact variance reaches 4.
  bool variance_eligible = false;
};

inline constexpr double kVerdictFinalBound = 0.1;

// trajectories[o][l]: normalized cumulant of order o + 3 at L_grid[l].
Verdict clt_verdict(const std::vector<double>& L_grid,
                    const std::vector<std::vector<double>>& trajectories, double final_variance);
Verdict clt_verdict(const CltResult& r);

struct ScanFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rel_residual = 0.0;
};

struct VarianceScan {
  std::vector<double> L;
  std::vector<long> n_sites;
  std::vector<double> var;
  ScanFit log_fit;    // Var = a + b ln L
  ScanFit power_fit;  // ln Var = c + e ln L
  std::string preferred;
  std::size_t fit_from = 0;  // first grid index in the fit window
  // Var / (sigma^2 L ∫ f^2) at the largest L; NaN when sigma^2 = 0.
  double sigma2_ratio = std::numeric_limits<double>::quiet_NaN();
};

VarianceScan variance_scan(const ExperimentSpec& spec);

struct MScan {
  std::vector<double> lambda;
  std::vector<double> m;
  std::vector<double> phi_ratio;  // m(2 lambda) / (2^alpha m(lambda))
  std::vector<bool> used;
  double alpha = 0.0;
  double rms_residual = 0.0;
  double lambda_floor = 0.0;
};

inline constexpr double kResolutionMargin = 4.0;

MScan m_scan(const SpectralFunction& s, const std::vector<double>& lambda_grid);

struct Theorem2Row {
  double L = 0.0;
  long n_sites = 0;
  double exact_mean = 0.0;
  double exact_var = 0.0;
  double center = 0.0;
  double center_discrepancy = 0.0;
  double var_ratio = 0.0;  // exact Var / (sigma^2 L ∫ f^2)
  double emp_mean = std::numeric_limits<double>::quiet_NaN();
  double emp_var = std::numeric_limits<double>::quiet_NaN();
  double emp_skew = std::numeric_limits<double>::quiet_NaN();
  double emp_kurt = std::numeric_limits<double>::quiet_NaN();
  double ks_dist = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

struct Theorem2Result {
  double sigma2 = 0.0;
  double int_f2 = 0.0;
  std::vector<Theorem2Row> rows;
};

// Normalizes by sigma L^{1/2} around A(0) L ∫ f. emp_* describe that
// normalized statistic; ks_dist uses the exact mean and variance.
Theorem2Result theorem2_run(const ExperimentSpec& spec);

}  // namespace dpp
