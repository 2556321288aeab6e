#include "dpplab/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "dpplab/error.hpp"

namespace dpp {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_normal(std::span<const double> x, double mu, double sigma) {
  std::vector<double> z(x.begin(), x.end());
  std::sort(z.begin(), z.end());
  const double n = double(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf((z[i] - mu) / sigma);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return d;
}

double ks_normal_lattice(std::span<const double> x, double mu, double sigma, double step) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double n = double(v.size());
  // Below the smallest observed point the empirical CDF is 0.
  double d = normal_cdf((v.front() - step / 2 - mu) / sigma);
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && std::abs(v[j] - v[i]) < step / 2) ++j;
    const double fn = double(j) / n;
    const double g = normal_cdf((v[i] + step / 2 - mu) / sigma);
    d = std::max(d, std::abs(fn - g));
    // Skipped lattice points between v[i] and the next observed value share F_n.
    if (j < v.size() && v[j] - v[i] > 1.5 * step) {
      d = std::max(d, std::abs(fn - normal_cdf((v[j] - step / 2 - mu) / sigma)));
    }
    i = j;
  }
  return d;
}

std::optional<double> lattice_step(std::span<const double> values) {
  double h = 0.0;
  for (double v : values)
    if (v != 0.0 && (h == 0.0 || std::abs(v) < h)) h = std::abs(v);
  if (h == 0.0) return std::nullopt;
  for (double v : values) {
    const double q = v / h;
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, std::abs(q))) return std::nullopt;
  }
  return h;
}

SampleMoments sample_moments(std::span<const double> x) {
  SampleMoments m;
  m.n = x.size();
  if (x.empty()) return m;
  const double n = double(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.var = x.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    m.skew = m3 / std::pow(m2, 1.5);
    m.kurt = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "linear fit needs two or more (x, y) pairs");
  }
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  return f;
}

ChiSquare chi_square_test(std::span<const std::size_t> observed, std::span<const double> prob,
                          double min_expected) {
  if (observed.size() != prob.size()) {
    throw Error(ErrorCode::InvalidArgument, "observed and expected cells differ in number");
  }
  const double total = double(std::accumulate(observed.begin(), observed.end(), std::size_t(0)));
  ChiSquare c;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = prob[i] * total;
    if (e < min_expected) {
      pooled_obs += double(observed[i]);
      pooled_exp += e;
      continue;
    }
    c.statistic += (double(observed[i]) - e) * (double(observed[i]) - e) / e;
    ++cells;
  }
  if (pooled_exp == 0.0 && pooled_obs > 0.0) {
    c.statistic = std::numeric_limits<double>::infinity();
  } else if (pooled_exp > 0.0) {
    c.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  c.dof = cells - 1;
  c.p_value = c.dof > 0 ? boost::math::gamma_q(0.5 * c.dof, 0.5 * c.statistic) : 1.0;
  return c;
}

}  // namespace dpp
