#include "dpplab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "dpplab/error.hpp"
#include "dpplab/exact_stats.hpp"
#include "dpplab/kernel.hpp"
#include "dpplab/sampler.hpp"
#include "dpplab/statistics.hpp"

namespace dpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void invalid(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::ValidationError, key + ": " + why);
}

// Everything one grid point needs: the torus kernel, the statistic on its
// sites, and (when affordable) the dense kernel on the support of f.
struct Cell {
  double L = 0.0;
  MatrixKernel torus;
  std::vector<double> f;
  std::vector<long> support;
  std::optional<MatrixKernel> window;
  std::vector<double> fw;

  Cell(const ExperimentSpec& spec, double l, bool want_window)
      : L(l), torus(build_circulant(spec.kernel, spec.n_sites_for(l))) {
    f = spec.statistic.values_on(torus.coordinates(), L);
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f[i] != 0.0) support.push_back(static_cast<long>(i));
    const bool fits = static_cast<long>(support.size()) <= kMaxDenseSites;
    if (spec.perturbation.enabled && !fits) {
      throw Error(ErrorCode::TooManySites,
                  "perturbed window of " + std::to_string(support.size()) + " sites at L = " +
                      std::to_string(L) + " exceeds " + std::to_string(kMaxDenseSites));
    }
    if ((want_window && fits) || spec.perturbation.enabled) {
      MatrixKernel w = torus.restrict_to(support);
      if (spec.perturbation.enabled) {
        const auto env = rank_one_damping(torus, spec.perturbation.epsilon, spec.perturbation.width,
                                          support);
        w = perturb(w, env);
      }
      window = std::move(w);
      fw.resize(support.size());
      for (std::size_t a = 0; a < support.size(); ++a) fw[a] = f[static_cast<std::size_t>(support[a])];
    }
  }

  double mean() const { return window ? mean_Sf(*window, fw) : mean_Sf(torus, f); }
  double var() const { return window ? var_Sf(*window, fw) : var_Sf(torus, f); }
};

bool constant_on_support(const std::vector<double>& fw) {
  return !fw.empty() && std::all_of(fw.begin(), fw.end(), [&](double v) { return v == fw.front(); });
}

// S_f for n samples of the window kernel; streams carry the row index in
// their upper bits so rows never share randomness.
std::vector<double> draw_statistics(const Cell& cell, std::size_t n, std::uint64_t seed,
                                    std::uint64_t row, int workers) {
  const Sampler sampler(*cell.window);
  std::vector<double> s(n);
  const bool constant = constant_on_support(cell.fw);
  const double c = constant ? cell.fw.front() : 0.0;
  parallel_for(n, workers, [&](std::size_t i) {
    const std::uint64_t stream = (row << 40) | i;
    if (constant) {
      // A constant statistic only sees the point count, which the selection
      // stage fixes.
      s[i] = c * double(sampler.sample_count(seed, stream));
      return;
    }
    const Configuration conf = sampler.sample(seed, stream);
    double v = 0.0;
    for (long x : conf.sites) v += cell.fw[static_cast<std::size_t>(x)];
    s[i] = v;
  });
  return s;
}

std::size_t fit_start(std::size_t n) { return n / 3; }

}  // namespace

long ExperimentSpec::n_sites_for(double L) const {
  if (n_sites > 0) return n_sites;
  return static_cast<long>(std::ceil(window_factor * L));
}

long ExperimentSpec::support_sites(double L) const {
  const long lo = static_cast<long>(std::ceil(L * statistic.support_lo()));
  const long hi = static_cast<long>(std::floor(L * statistic.support_hi()));
  return std::max(0L, hi - lo + 1);
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.L_grid.empty()) invalid("grid.L", "grid is empty");
  for (std::size_t i = 0; i < spec.L_grid.size(); ++i) {
    if (!(spec.L_grid[i] > 0.0) || !std::isfinite(spec.L_grid[i])) invalid("grid.L", "values must be positive");
    if (i > 0 && !(spec.L_grid[i] > spec.L_grid[i - 1])) invalid("grid.L", "grid must be strictly increasing");
  }
  if (!(spec.window_factor > 0.0)) invalid("grid.window_factor", "must be positive");
  if (spec.cumulant_order < 2 || spec.cumulant_order > kMaxCumulantOrder) {
    invalid("stats.cumulant_order", "must lie in [2, " + std::to_string(kMaxCumulantOrder) + "]");
  }
  if (spec.perturbation.enabled &&
      (!(spec.perturbation.epsilon >= 0.0 && spec.perturbation.epsilon <= 1.0) ||
       !(spec.perturbation.width > 0.0))) {
    invalid("kernel.perturbation", "need 0 <= epsilon <= 1 and width > 0");
  }
  if (spec.workers < 1) invalid("workers", "must be at least 1");
  const std::string size_key = spec.n_sites > 0 ? "kernel.n_sites" : "grid.window_factor";
  for (double L : spec.L_grid) {
    const long n = spec.n_sites_for(L);
    if (n < 2) invalid(size_key, "lattice has fewer than 2 sites at L = " + std::to_string(L));
    const long need = static_cast<long>(std::ceil(kMarginFactor * double(spec.support_sites(L))));
    if (n < need) {
      invalid(size_key, std::to_string(n) + " sites at L = " + std::to_string(L) + " leave less than margin " +
                            std::to_string(kMarginFactor) + " around the support (" + std::to_string(need) +
                            " needed)");
    }
    const double lo = L * spec.statistic.support_lo(), hi = L * spec.statistic.support_hi();
    if (lo < -double(n / 2) || hi >= double(n - n / 2)) {
      invalid("statistic.function", "scaled support leaves the lattice at L = " + std::to_string(L));
    }
  }
}

double CltRow::c3_norm() const { return c_norm.empty() ? kNaN : c_norm[0]; }
double CltRow::c4_norm() const { return c_norm.size() < 2 ? kNaN : c_norm[1]; }

ExactRow exact_row(const ExperimentSpec& spec, double L) {
  const Cell cell(spec, L, true);
  ExactRow row;
  row.L = L;
  row.n_sites = cell.torus.n_sites();
  row.mean = cell.mean();
  row.var = cell.var();
  try {
    row.var_spectral = var_spectral(spec.kernel, spec.statistic, L, row.n_sites);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingFourier) throw;
  }
  if (cell.window) {
    const CumulantTable t = cumulant_table(*cell.window, cell.fw, spec.cumulant_order);
    row.cumulants = t.values;
    for (int n = 3; n <= spec.cumulant_order; ++n) row.c_norm.push_back(t.c_norm(n));
  }
  return row;
}

CltResult run_clt(const ExperimentSpec& spec) {
  validate_spec(spec);
  CltResult out;
  const int order = std::max(4, spec.cumulant_order);
  for (std::size_t l = 0; l < spec.L_grid.size(); ++l) {
    const double L = spec.L_grid[l];
    const bool mc = spec.n_samples > 0 && L <= spec.mc_max_L;
    const Cell cell(spec, L, true);
    CltRow row;
    row.L = L;
    row.n_sites = cell.torus.n_sites();
    row.seed = spec.seed;
    row.exact_mean = cell.mean();
    row.exact_var = cell.var();
    if (!(row.exact_var >= kMinVariance)) {
      throw Error(ErrorCode::VarianceTooSmall, "exact variance " + std::to_string(row.exact_var) +
                                                   " at L = " + std::to_string(L) + " is below 1e-6");
    }
    row.c_norm.assign(static_cast<std::size_t>(order - 2), kNaN);
    if (cell.window) {
      const CumulantTable t = cumulant_table(*cell.window, cell.fw, order);
      for (int n = 3; n <= order; ++n) row.c_norm[static_cast<std::size_t>(n - 3)] = t.c_norm(n);
    }
    if (mc) {
      if (!cell.window) {
        throw Error(ErrorCode::TooManySites, "support of " + std::to_string(cell.support.size()) +
                                                 " sites is too large to sample at L = " + std::to_string(L));
      }
      const auto s = draw_statistics(cell, spec.n_samples, spec.seed, l, spec.workers);
      const SampleMoments m = sample_moments(s);
      row.n_samples = s.size();
      row.emp_mean = m.mean;
      row.emp_var = m.var;
      row.emp_skew = m.skew;
      row.emp_kurt = m.kurt;
      const double sd = std::sqrt(row.exact_var);
      row.ks_raw = ks_normal(s, row.exact_mean, sd);
      const auto step = lattice_step(cell.fw);
      if (step) {
        out.lattice_step = *step;
        row.ks_dist = ks_normal_lattice(s, row.exact_mean, sd, *step);
      } else {
        row.ks_dist = row.ks_raw;
      }
      const double n = double(s.size());
      row.mean_gate = std::abs(m.mean - row.exact_mean) < 5.0 * std::sqrt(row.exact_var / n);
      const double k4 = std::isnan(row.c4_norm()) ? 0.0 : row.c4_norm();
      const double se_var = row.exact_var * std::sqrt(std::max(0.0, 2.0 / (n - 1.0) + k4 / n));
      row.var_gate = std::abs(m.var - row.exact_var) < 5.0 * se_var;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

Verdict clt_verdict(const std::vector<double>& L_grid,
                    const std::vector<std::vector<double>>& traj, double final_variance) {
  Verdict v;
  v.variance_eligible = final_variance >= 4.0;
  const std::size_t n = L_grid.size();
  if (n < 3) {
    v.reason = "fewer than 3 grid points";
    return v;
  }
  const std::size_t from = n / 2;
  for (std::size_t o = 0; o < traj.size(); ++o) {
    const auto& t = traj[o];
    const std::string name = "C" + std::to_string(o + 3);
    if (t.size() != n) {
      v.reason = name + " trajectory length differs from the grid";
      return v;
    }
    for (std::size_t i = from; i < n; ++i) {
      if (!std::isfinite(t[i])) {
        v.reason = name + " unavailable at L = " + std::to_string(L_grid[i]);
        return v;
      }
      if (i > from && std::abs(t[i]) > std::abs(t[i - 1]) + 1e-9) {
        v.reason = name + " grows between L = " + std::to_string(L_grid[i - 1]) + " and " +
                   std::to_string(L_grid[i]);
        return v;
      }
    }
    if (!(std::abs(t.back()) < kVerdictFinalBound)) {
      v.reason = name + " final magnitude " + std::to_string(std::abs(t.back())) + " is not below 0.1";
      return v;
    }
  }
  v.pass = true;
  v.reason = "normalized cumulants decrease over the upper half of the grid";
  return v;
}

Verdict clt_verdict(const CltResult& r) {
  std::vector<double> L;
  std::vector<std::vector<double>> traj;
  if (!r.rows.empty()) traj.resize(r.rows.front().c_norm.size());
  for (const auto& row : r.rows) {
    L.push_back(row.L);
    for (std::size_t o = 0; o < traj.size(); ++o) traj[o].push_back(row.c_norm[o]);
  }
  return clt_verdict(L, traj, r.rows.empty() ? 0.0 : r.rows.back().exact_var);
}

VarianceScan variance_scan(const ExperimentSpec& spec) {
  validate_spec(spec);
  if (spec.L_grid.size() < 5) invalid("grid.L", "variance scan needs at least 5 grid points");
  VarianceScan out;
  for (double L : spec.L_grid) {
    const long n = spec.n_sites_for(L);
    double v;
    if (spec.scan_method == ExperimentSpec::ScanMethod::spectral) {
      v = var_spectral(spec.kernel, spec.statistic, L, n);
    } else {
      v = Cell(spec, L, false).var();
    }
    out.L.push_back(L);
    out.n_sites.push_back(n);
    out.var.push_back(v);
  }
  const std::size_t from = fit_start(out.L.size());
  out.fit_from = from;
  std::vector<double> lx, y, ly;
  for (std::size_t i = from; i < out.L.size(); ++i) {
    lx.push_back(std::log(out.L[i]));
    y.push_back(out.var[i]);
    ly.push_back(std::log(out.var[i]));
  }
  const LinearFit a = linear_fit(lx, y);
  const LinearFit b = linear_fit(lx, ly);
  double ra = 0.0, rb = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double fa = a.intercept + a.slope * lx[i];
    const double fb = std::exp(b.intercept + b.slope * lx[i]);
    ra += std::pow((y[i] - fa) / y[i], 2);
    rb += std::pow((y[i] - fb) / y[i], 2);
  }
  out.log_fit = {a.slope, a.intercept, std::sqrt(ra / double(lx.size()))};
  out.power_fit = {b.slope, b.intercept, std::sqrt(rb / double(lx.size()))};
  out.preferred = out.log_fit.rel_residual <= out.power_fit.rel_residual ? "log" : "power";
  const double s2 = sigma2(spec.kernel);
  if (s2 > kMinVariance) {
    out.sigma2_ratio = out.var.back() / (s2 * out.L.back() * spec.statistic.integral_sq());
  }
  return out;
}

MScan m_scan(const SpectralFunction& s, const std::vector<double>& grid) {
  if (grid.size() < 8) throw Error(ErrorCode::InvalidArgument, "m_scan needs at least 8 lambda values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda values must be positive");
    if (i > 0 && !(grid[i] < grid[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "lambda grid must decrease toward 0");
    }
  }
  MScan out;
  out.lambda_floor = kResolutionMargin * s.resolution_floor();
  std::vector<double> lx, ly;
  bool any = false;
  for (double lam : grid) {
    const double m = m_lambda(s, lam);
    any = any || m != 0.0;
    const bool use = m > 0.0 && lam >= out.lambda_floor;
    out.lambda.push_back(lam);
    out.m.push_back(m);
    out.used.push_back(use);
    if (use) {
      lx.push_back(std::log(lam));
      ly.push_back(std::log(m));
    }
  }
  if (!any) throw Error(ErrorCode::MZero, "m(lambda) vanishes on the whole grid");
  if (lx.size() < 2) throw Error(ErrorCode::InvalidArgument, "fewer than 2 lambda values above the resolution floor");
  const LinearFit f = linear_fit(lx, ly);
  out.alpha = f.slope;
  out.rms_residual = f.rms_residual;
  for (std::size_t i = 0; i < out.lambda.size(); ++i) {
    const double m2 = m_lambda(s, 2.0 * out.lambda[i]);
    out.phi_ratio.push_back(out.m[i] > 0.0 ? m2 / (std::pow(2.0, out.alpha) * out.m[i]) : kNaN);
  }
  return out;
}

Theorem2Result theorem2_run(const ExperimentSpec& spec) {
  validate_spec(spec);
  Theorem2Result out;
  out.sigma2 = sigma2(spec.kernel);
  if (!(out.sigma2 > kMinVariance)) {
    throw Error(ErrorCode::SigmaZero, "sigma^2 = " + std::to_string(out.sigma2) +
                                          ": the symbol is an indicator and the normalization degenerates");
  }
  out.int_f2 = spec.statistic.integral_sq();
  const double a0 = spec.kernel.total_mass();
  const double int_f = spec.statistic.integral();
  const double sigma = std::sqrt(out.sigma2);
  for (std::size_t l = 0; l < spec.L_grid.size(); ++l) {
    const double L = spec.L_grid[l];
    const bool mc = spec.n_samples > 0 && L <= spec.mc_max_L;
    const Cell cell(spec, L, mc);
    Theorem2Row row;
    row.L = L;
    row.n_sites = cell.torus.n_sites();
    row.seed = spec.seed;
    row.exact_mean = cell.mean();
    row.exact_var = cell.var();
    row.center = a0 * L * int_f;
    row.center_discrepancy = row.exact_mean - row.center;
    row.var_ratio = row.exact_var / (out.sigma2 * L * out.int_f2);
    if (mc) {
      if (!cell.window) {
        throw Error(ErrorCode::TooManySites, "support too large to sample at L = " + std::to_string(L));
      }
      const auto s = draw_statistics(cell, spec.n_samples, spec.seed, l, spec.workers);
      std::vector<double> z(s.size());
      const double scale = sigma * std::sqrt(L);
      for (std::size_t i = 0; i < s.size(); ++i) z[i] = (s[i] - row.center) / scale;
      const SampleMoments m = sample_moments(z);
      row.n_samples = s.size();
      row.emp_mean = m.mean;
      row.emp_var = m.var;
      row.emp_skew = m.skew;
      row.emp_kurt = m.kurt;
      const double sd = std::sqrt(row.exact_var);
      const auto step = lattice_step(cell.fw);
      row.ks_dist = step ? ks_normal_lattice(s, row.exact_mean, sd, *step)
                         : ks_normal(s, row.exact_mean, sd);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace dpp
