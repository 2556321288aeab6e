#include "dpplab/exact_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <quadmath.h>
#include <unsupported/Eigen/FFT>

#include "dpplab/error.hpp"

namespace dpp {

namespace {

using qreal = __float128;
using qcplx = std::complex<qreal>;

// Sites where f is nonzero: the only rows and columns that matter.
std::vector<long> support_of(std::span<const double> f) {
  std::vector<long> s;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) s.push_back(static_cast<long>(i));
  return s;
}

void check_length(const MatrixKernel& k, std::span<const double> f) {
  if (static_cast<long>(f.size()) != k.n_sites()) {
    throw Error(ErrorCode::InvalidArgument, "test vector length " + std::to_string(f.size()) +
                                                " does not match " + std::to_string(k.n_sites()) +
                                                " sites");
  }
}

std::vector<double> gather(std::span<const double> f, const std::vector<long>& s) {
  std::vector<double> out(s.size());
  for (std::size_t a = 0; a < s.size(); ++a) out[a] = f[static_cast<std::size_t>(s[a])];
  return out;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

template <typename Mat>
struct CumulantEngine {
  int n_max;
  std::vector<Mat> scaled;  // scaled[p] = diag(f^p) K
  std::vector<double> acc;

  void descend(const Mat& prefix, int sum, int parts, double weight) {
    for (int p = 1; sum + p <= n_max; ++p) {
      const Mat& m = scaled[static_cast<std::size_t>(p)];
      const double w = weight / factorial(p);
      const int n = sum + p;
      const double tr = std::real((prefix.array() * m.transpose().array()).sum());
      const double sign = (parts % 2 == 0) ? 1.0 : -1.0;
      acc[static_cast<std::size_t>(n - 1)] += sign / double(parts + 1) * factorial(n) * w * tr;
      if (n < n_max) {
        Mat next = prefix * m;
        descend(next, n, parts + 1, w);
      }
    }
  }

  void run(const Mat& k, const std::vector<double>& f) {
    const Eigen::Index s = k.rows();
    scaled.assign(static_cast<std::size_t>(n_max + 1), Mat());
    Eigen::VectorXd fp = Eigen::VectorXd::Ones(s);
    const Eigen::Map<const Eigen::VectorXd> fv(f.data(), s);
    for (int p = 1; p <= n_max; ++p) {
      fp = fp.cwiseProduct(fv);
      scaled[static_cast<std::size_t>(p)] = fp.asDiagonal() * k;
    }
    acc.assign(static_cast<std::size_t>(n_max), 0.0);
    // Length-one compositions: Tr(f^p K) with no matrix product.
    for (int p = 1; p <= n_max; ++p) {
      const Mat& m = scaled[static_cast<std::size_t>(p)];
      acc[static_cast<std::size_t>(p - 1)] += std::real(m.trace());
      if (p < n_max) descend(m, p, 1, 1.0 / factorial(p));
    }
  }
};

qreal qabs(const qcplx& z) { return hypotq(z.real(), z.imag()); }

qcplx qlog(const qcplx& z) { return {logq(qabs(z)), atan2q(z.imag(), z.real())}; }

}  // namespace

double rho_n(const MatrixKernel& k, std::span<const long> sites) {
  std::vector<long> sorted(sites.begin(), sites.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::DuplicateSites, "rho_n needs distinct sites");
  }
  if (sites.empty()) return 1.0;
  const long m = static_cast<long>(sites.size());
  Eigen::MatrixXcd minor(m, m);
  for (long a = 0; a < m; ++a) {
    if (sites[a] < 0 || sites[a] >= k.n_sites()) {
      throw Error(ErrorCode::InvalidArgument, "site index out of range");
    }
  }
  for (long a = 0; a < m; ++a)
    for (long b = 0; b < m; ++b) minor(a, b) = k(sites[a], sites[b]);
  return minor.determinant().real();
}

double mean_Sf(const MatrixKernel& k, std::span<const double> f) {
  check_length(k, f);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) s += f[i] * k.diagonal(static_cast<long>(i));
  return s;
}

double mean_Sf(const MatrixKernel& k, const TestFunction& f, double L) {
  const auto v = f.values_on(k.coordinates(), L);
  return mean_Sf(k, std::span<const double>(v));
}

double var_Sf(const MatrixKernel& k, std::span<const double> f) {
  check_length(k, f);
  const std::vector<long> s = support_of(f);
  const std::size_t m = s.size();
  if (m == 0) return 0.0;
  double diag = 0.0;
  for (long i : s) diag += f[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)] * k.diagonal(i);

  if (k.structure() == MatrixKernel::Structure::circulant && long(m) > kMaxDenseSites) {
    // sum_ij f_i f_j |c(i - j)|^2 as a circular convolution.
    const long n = k.n_sites();
    std::vector<cplx> g(static_cast<std::size_t>(n)), fv(static_cast<std::size_t>(n));
    for (long d = 0; d < n; ++d) g[d] = std::norm(k.generator()[static_cast<std::size_t>(d)]);
    for (long i = 0; i < n; ++i) fv[i] = f[static_cast<std::size_t>(i)];
    Eigen::FFT<double> fft;
    std::vector<cplx> fg, ff, conv;
    fft.fwd(fg, g);
    fft.fwd(ff, fv);
    for (long q = 0; q < n; ++q) fg[q] *= ff[q];
    fft.inv(conv, fg);
    double off = 0.0;
    for (long i = 0; i < n; ++i) off += f[static_cast<std::size_t>(i)] * conv[i].real();
    return diag - off;
  }

  double off = 0.0;
  if (k.structure() == MatrixKernel::Structure::circulant) {
    const long n = k.n_sites();
    std::vector<double> g(static_cast<std::size_t>(n));
    for (long d = 0; d < n; ++d) g[d] = std::norm(k.generator()[static_cast<std::size_t>(d)]);
    for (std::size_t a = 0; a < m; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        long d = (s[a] - s[b]) % n;
        if (d < 0) d += n;
        row += f[static_cast<std::size_t>(s[b])] * g[static_cast<std::size_t>(d)];
      }
      off += f[static_cast<std::size_t>(s[a])] * row;
    }
  } else if (k.is_real()) {
    const auto& km = k.real_matrix();
    for (std::size_t a = 0; a < m; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        const double v = km(s[a], s[b]);
        row += f[static_cast<std::size_t>(s[b])] * v * v;
      }
      off += f[static_cast<std::size_t>(s[a])] * row;
    }
  } else {
    const auto& km = k.complex_matrix();
    for (std::size_t a = 0; a < m; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < m; ++b) row += f[static_cast<std::size_t>(s[b])] * std::norm(km(s[a], s[b]));
      off += f[static_cast<std::size_t>(s[a])] * row;
    }
  }
  return diag - off;
}

double var_Sf(const MatrixKernel& k, const TestFunction& f, double L) {
  const auto v = f.values_on(k.coordinates(), L);
  return var_Sf(k, std::span<const double>(v));
}

double var_spectral(const SpectralFunction& s, const TestFunction& f, double L, long n_sites) {
  if (!(L > 0.0)) throw Error(ErrorCode::InvalidArgument, "L must be positive");
  if (f.has_fourier()) {
    const double kmax = std::min(L / 2.0, f.fourier_cutoff().value_or(L / 2.0));
    // Resolve oscillations of period 1 / width and kinks of m at the
    // spectral resolution floor.
    const double span = f.support_hi() - f.support_lo();
    double pts = std::max(65536.0, 64.0 * kmax * std::max(1.0, span));
    if (s.resolution_floor() > 0.0) pts = std::max(pts, 16.0 * kmax / (s.resolution_floor() * L));
    long n = static_cast<long>(std::min(pts, 16777216.0));
    n += n % 2;
    const double h = kmax / double(n);
    double acc = 0.0;
    for (long i = 0; i <= n; ++i) {
      const double k = h * double(i);
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * f.fourier_sq(k) * m_lambda(s, k / L);
    }
    // Both half-lines, since |f^|^2 and m are even.
    return 2.0 * L * acc * h / 3.0;
  }
  if (n_sites < 2) {
    throw Error(ErrorCode::MissingFourier,
                f.describe() + " has no closed-form transform and no torus size was given");
  }
  std::vector<cplx> fv(static_cast<std::size_t>(n_sites)), out;
  for (long i = 0; i < n_sites; ++i) fv[i] = f(double(i - n_sites / 2) / L);
  Eigen::FFT<double> fft;
  fft.fwd(out, fv);
  double acc = 0.0;
  for (long q = 0; q < n_sites; ++q) acc += std::norm(out[q]) * m_lambda(s, double(q) / double(n_sites));
  return acc / double(n_sites);
}

CumulantTable cumulant_table(const MatrixKernel& k, std::span<const double> f, int n_max) {
  if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
  if (n_max > kMaxCumulantOrder) {
    throw Error(ErrorCode::OrderTooLarge,
                "cumulant order " + std::to_string(n_max) + " exceeds " + std::to_string(kMaxCumulantOrder));
  }
  check_length(k, f);
  const std::vector<long> s = support_of(f);
  CumulantTable t;
  t.values.assign(static_cast<std::size_t>(n_max), 0.0);
  if (!s.empty()) {
    const std::vector<double> fs = gather(f, s);
    const MatrixKernel w = k.restrict_to(s);
    if (w.is_real()) {
      CumulantEngine<Eigen::MatrixXd> e{n_max, {}, {}};
      e.run(w.real_matrix(), fs);
      t.values = e.acc;
    } else {
      CumulantEngine<Eigen::MatrixXcd> e{n_max, {}, {}};
      e.run(w.complex_matrix(), fs);
      t.values = e.acc;
    }
  }
  t.normalized.assign(static_cast<std::size_t>(n_max), std::numeric_limits<double>::quiet_NaN());
  if (n_max >= 2 && t.values[1] > 0.0) {
    for (int n = 3; n <= n_max; ++n) {
      t.normalized[static_cast<std::size_t>(n - 1)] = t.values[static_cast<std::size_t>(n - 1)] /
                                                      std::pow(t.values[1], 0.5 * n);
    }
  }
  return t;
}

CumulantTable cumulant_table(const MatrixKernel& k, const TestFunction& f, double L, int n_max) {
  const auto v = f.values_on(k.coordinates(), L);
  return cumulant_table(k, std::span<const double>(v), n_max);
}

std::complex<__float128> charfn_logdet_quad(const MatrixKernel& k, std::span<const double> f,
                                            double t) {
  check_length(k, f);
  const std::vector<long> s = support_of(f);
  const std::size_t m = s.size();
  if (m == 0 || t == 0.0) return {0, 0};
  std::vector<qcplx> a(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    const qreal phase = qreal(t) * qreal(f[static_cast<std::size_t>(s[i])]);
    const qcplx d(cosq(phase) - 1, sinq(phase));
    for (std::size_t j = 0; j < m; ++j) {
      const cplx kij = k(s[i], s[j]);
      a[i * m + j] = d * qcplx(kij.real(), kij.imag());
    }
    a[i * m + i] += 1;
  }
  qcplx logdet(0, 0);
  int swaps = 0;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    qreal best = qabs(a[c * m + c]);
    for (std::size_t r = c + 1; r < m; ++r) {
      const qreal v = qabs(a[r * m + c]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > qreal(1e-300))) {
      throw Error(ErrorCode::NumericallySingular,
                  "determinant pivot underflow at t = " + std::to_string(t));
    }
    if (piv != c) {
      for (std::size_t j = 0; j < m; ++j) std::swap(a[c * m + j], a[piv * m + j]);
      ++swaps;
    }
    const qcplx p = a[c * m + c];
    logdet += qlog(p);
    for (std::size_t r = c + 1; r < m; ++r) {
      const qcplx factor = a[r * m + c] / p;
      if (factor == qcplx(0, 0)) continue;
      for (std::size_t j = c + 1; j < m; ++j) a[r * m + j] -= factor * a[c * m + j];
    }
  }
  if (swaps % 2) logdet += qcplx(0, acosq(qreal(-1)));
  return logdet;
}

std::complex<double> charfn_logdet(const MatrixKernel& k, std::span<const double> f, double t) {
  const auto q = charfn_logdet_quad(k, f, t);
  return {static_cast<double>(q.real()), static_cast<double>(q.imag())};
}

std::complex<double> charfn_logdet(const MatrixKernel& k, const TestFunction& f, double L, double t) {
  const auto v = f.values_on(k.coordinates(), L);
  return charfn_logdet(k, std::span<const double>(v), t);
}

SubsetDistribution brute_force_distribution(const MatrixKernel& k) {
  const long n = k.n_sites();
  if (n > kMaxBruteForceSites) {
    throw Error(ErrorCode::TooManySites, "brute force needs at most " +
                                             std::to_string(kMaxBruteForceSites) + " sites, got " +
                                             std::to_string(n));
  }
  SubsetDistribution out;
  out.n_sites = static_cast<int>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(k.to_matrix());
  Eigen::VectorXd lam = es.eigenvalues();
  constexpr double top = 1.0 - 1e-12;
  double log_norm = 0.0;  // log det(I - K) = -log det(I + L)
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    double v = lam[j];
    if (v >= top) out.kernel_at_one = true;
    const double clipped = std::clamp(v, 0.0, top);
    out.clip_perturbation = std::max(out.clip_perturbation, std::abs(clipped - v));
    lam[j] = clipped;
    log_norm += std::log1p(-clipped);
  }
  Eigen::VectorXd ratio = lam.array() / (1.0 - lam.array());
  const Eigen::MatrixXcd ell = es.eigenvectors() * ratio.asDiagonal() * es.eigenvectors().adjoint();

  const std::size_t count = std::size_t(1) << n;
  out.prob.assign(count, 0.0);
  const double z = std::exp(log_norm);
  for (std::size_t mask = 0; mask < count; ++mask) {
    std::vector<long> idx;
    for (long i = 0; i < n; ++i)
      if (mask >> i & 1u) idx.push_back(i);
    double det = 1.0;
    if (!idx.empty()) {
      const long m = static_cast<long>(idx.size());
      Eigen::MatrixXcd sub(m, m);
      for (long a = 0; a < m; ++a)
        for (long b = 0; b < m; ++b) sub(a, b) = ell(idx[a], idx[b]);
      det = sub.determinant().real();
    }
    out.prob[mask] = std::max(0.0, det) * z;
  }
  return out;
}

std::vector<double> pmf_cumulants(const SubsetDistribution& d, std::span<const double> f, int n_max) {
  if (static_cast<int>(f.size()) != d.n_sites) {
    throw Error(ErrorCode::InvalidArgument, "test vector length does not match the pmf");
  }
  const std::size_t count = d.prob.size();
  std::vector<double> value(count, 0.0);
  double mean = 0.0;
  for (std::size_t mask = 0; mask < count; ++mask) {
    double v = 0.0;
    for (int i = 0; i < d.n_sites; ++i)
      if (mask >> i & 1u) v += f[static_cast<std::size_t>(i)];
    value[mask] = v;
    mean += d.prob[mask] * v;
  }
  std::vector<double> mu(static_cast<std::size_t>(n_max + 1), 0.0);
  for (std::size_t mask = 0; mask < count; ++mask) {
    const double x = value[mask] - mean;
    double p = d.prob[mask];
    for (int r = 1; r <= n_max; ++r) {
      p *= x;
      mu[static_cast<std::size_t>(r)] += p;
    }
  }
  std::vector<double> kappa(static_cast<std::size_t>(n_max + 1), 0.0);
  for (int n = 2; n <= n_max; ++n) {
    double v = mu[static_cast<std::size_t>(n)];
    for (int j = 2; j <= n - 2; ++j) v -= binomial(n - 1, j - 1) * kappa[static_cast<std::size_t>(j)] * mu[static_cast<std::size_t>(n - j)];
    kappa[static_cast<std::size_t>(n)] = v;
  }
  kappa[1] = mean;
  return {kappa.begin() + 1, kappa.end()};
}

Moments cumulants_to_moments(std::span<const double> c) {
  const int n = static_cast<int>(c.size());
  Moments m;
  m.raw.assign(static_cast<std::size_t>(n), 0.0);
  m.central.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> raw(static_cast<std::size_t>(n + 1), 0.0), cen(static_cast<std::size_t>(n + 1), 0.0);
  raw[0] = cen[0] = 1.0;
  for (int r = 1; r <= n; ++r) {
    for (int j = 1; j <= r; ++j) {
      const double b = binomial(r - 1, j - 1);
      raw[static_cast<std::size_t>(r)] += b * c[static_cast<std::size_t>(j - 1)] * raw[static_cast<std::size_t>(r - j)];
      if (j >= 2) cen[static_cast<std::size_t>(r)] += b * c[static_cast<std::size_t>(j - 1)] * cen[static_cast<std::size_t>(r - j)];
    }
    m.raw[static_cast<std::size_t>(r - 1)] = raw[static_cast<std::size_t>(r)];
    m.central[static_cast<std::size_t>(r - 1)] = cen[static_cast<std::size_t>(r)];
  }
  return m;
}

Moments cumulants_to_moments(const CumulantTable& c) { return cumulants_to_moments(c.values); }

}  // namespace dpp
