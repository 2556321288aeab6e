#include "dpplab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

#include <unsupported/Eigen/FFT>

#include "dpplab/error.hpp"
#include "dpplab/hash.hpp"

namespace dpp {

struct MatrixKernel::Data {
  Structure structure = Structure::dense;
  long n = 0;
  bool real = true;
  std::vector<long> coords;
  std::vector<cplx> gen;
  Eigen::MatrixXd re;
  Eigen::MatrixXcd cx;
  std::uint64_t id = 0;

  mutable std::once_flag eig_once;
  mutable Eigen::VectorXd eig;
};

namespace {

std::vector<long> default_coords(long n, std::vector<long> coords) {
  if (coords.empty()) {
    coords.resize(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
  }
  if (static_cast<long>(coords.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "coordinate count does not match kernel size");
  }
  return coords;
}

template <typename M>
std::uint64_t hash_matrix(const M& m, std::uint64_t h) {
  return fnv1a64(m.data(), sizeof(typename M::Scalar) * static_cast<std::size_t>(m.size()), h);
}

void check_range(const Eigen::VectorXd& eig) {
  if (eig.size() == 0) return;
  const double lo = eig.minCoeff(), hi = eig.maxCoeff();
  if (lo < -kEigTol || hi > 1.0 + kEigTol) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "eigenvalues span [%.12g, %.12g], outside [0, 1] by more than %g",
                  lo, hi, kEigTol);
    throw Error(ErrorCode::AdmissibilityLost, buf);
  }
}

Eigen::VectorXd dense_eigenvalues(const MatrixKernel::Data& d) {
  if (d.n == 0) return {};
  if (d.real) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.re, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d.cx, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

MatrixKernel make_dense(Eigen::MatrixXd re, Eigen::MatrixXcd cx, std::vector<long> coords,
                        bool validate) {
  auto d = std::make_shared<MatrixKernel::Data>();
  d->structure = MatrixKernel::Structure::dense;
  d->real = cx.size() == 0;
  d->n = d->real ? re.rows() : cx.rows();
  if (d->n > kMaxDenseSites) {
    throw Error(ErrorCode::TooManySites, "dense kernel with " + std::to_string(d->n) +
                                             " sites exceeds " + std::to_string(kMaxDenseSites));
  }
  d->coords = default_coords(d->n, std::move(coords));
  d->re = std::move(re);
  d->cx = std::move(cx);
  std::uint64_t h = fnv1a64("dense", 5);
  h = fnv1a64(d->coords.data(), d->coords.size() * sizeof(long), h);
  d->id = d->real ? hash_matrix(d->re, h) : hash_matrix(d->cx, h);
  if (validate) {
    d->eig = dense_eigenvalues(*d);
    check_range(d->eig);
    std::call_once(d->eig_once, [] {});
  }
  return MatrixKernel(std::move(d));
}

MatrixKernel MatrixKernel::dense(const Eigen::MatrixXcd& m, std::vector<long> coordinates) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidArgument, "kernel matrix is not square");
  if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "kernel matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (m.size() > 0 && asym > 1e-12 * scale) {
    throw Error(ErrorCode::NotHermitian,
                "max |K - K^*| = " + std::to_string(asym) + " exceeds 1e-12 relative");
  }
  Eigen::MatrixXcd h = (m + m.adjoint()) * 0.5;
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) = h(i, i).real();
  if ((h.imag().array() == 0.0).all()) {
    return make_dense(h.real(), {}, std::move(coordinates), true);
  }
  return make_dense({}, std::move(h), std::move(coordinates), true);
}

MatrixKernel MatrixKernel::dense(const Eigen::MatrixXd& m, std::vector<long> coordinates) {
  return dense(Eigen::MatrixXcd(m.cast<cplx>()), std::move(coordinates));
}

long MatrixKernel::n_sites() const { return d_->n; }
MatrixKernel::Structure MatrixKernel::structure() const { return d_->structure; }
bool MatrixKernel::is_real() const { return d_->real; }
std::uint64_t MatrixKernel::id() const { return d_->id; }
std::span<const long> MatrixKernel::coordinates() const { return d_->coords; }
const std::vector<cplx>& MatrixKernel::generator() const { return d_->gen; }
const Eigen::MatrixXd& MatrixKernel::real_matrix() const { return d_->re; }
const Eigen::MatrixXcd& MatrixKernel::complex_matrix() const { return d_->cx; }

cplx MatrixKernel::operator()(long i, long j) const {
  const auto& d = *d_;
  if (d.structure == Structure::circulant) {
    long k = (i - j) % d.n;
    if (k < 0) k += d.n;
    return d.gen[static_cast<std::size_t>(k)];
  }
  return d.real ? cplx(d.re(i, j), 0.0) : d.cx(i, j);
}

double MatrixKernel::diagonal(long i) const {
  const auto& d = *d_;
  if (d.structure == Structure::circulant) return d.gen[0].real();
  return d.real ? d.re(i, i) : d.cx(i, i).real();
}

const Eigen::VectorXd& MatrixKernel::eigenvalues() const {
  std::call_once(d_->eig_once, [this] { d_->eig = dense_eigenvalues(*d_); });
  return d_->eig;
}

Eigen::MatrixXcd MatrixKernel::to_matrix() const {
  const auto& d = *d_;
  if (d.structure == Structure::dense) return d.real ? Eigen::MatrixXcd(d.re.cast<cplx>()) : d.cx;
  if (d.n > kMaxDenseSites) {
    throw Error(ErrorCode::TooManySites, "circulant too large to materialize");
  }
  Eigen::MatrixXcd m(d.n, d.n);
  for (long i = 0; i < d.n; ++i)
    for (long j = 0; j < d.n; ++j) m(i, j) = (*this)(i, j);
  return m;
}

MatrixKernel MatrixKernel::restrict_to(std::span<const long> sites) const {
  const long m = static_cast<long>(sites.size());
  std::vector<long> coords(sites.size());
  for (long a = 0; a < m; ++a) {
    const long s = sites[static_cast<std::size_t>(a)];
    if (s < 0 || s >= d_->n) throw Error(ErrorCode::InvalidArgument, "site index out of range");
    coords[static_cast<std::size_t>(a)] = d_->coords[static_cast<std::size_t>(s)];
  }
  if (d_->real) {
    Eigen::MatrixXd re(m, m);
    for (long a = 0; a < m; ++a)
      for (long b = 0; b < m; ++b) re(a, b) = (*this)(sites[a], sites[b]).real();
    return make_dense(std::move(re), {}, std::move(coords), false);
  }
  Eigen::MatrixXcd cx(m, m);
  for (long a = 0; a < m; ++a)
    for (long b = 0; b < m; ++b) cx(a, b) = (*this)(sites[a], sites[b]);
  return make_dense({}, std::move(cx), std::move(coords), false);
}

namespace {

// Sample j sits at frequency m_j / N with m_j = j - floor(N/2).
std::size_t dft_slot(long j, long n) { return static_cast<std::size_t>(((j - n / 2) % n + n) % n); }

// c[d] = (1/N) sum_j a_j exp(2 pi i d m_j / N).
std::vector<cplx> generator_from_samples(const std::vector<double>& a) {
  const long n = static_cast<long>(a.size());
  std::vector<cplx> in(a.size()), out;
  for (long j = 0; j < n; ++j) in[dft_slot(j, n)] = a[static_cast<std::size_t>(j)];
  Eigen::FFT<double> fft;
  fft.inv(out, in);
  return out;
}

void hermitize(std::vector<cplx>& c, bool real) {
  const std::size_t n = c.size();
  c[0] = c[0].real();
  for (std::size_t k = 1; 2 * k <= n; ++k) {
    const cplx v = 0.5 * (c[k] + std::conj(c[n - k]));
    c[k] = v;
    c[n - k] = std::conj(v);
    if (2 * k == n) c[k] = v.real();
  }
  if (real)
    for (auto& v : c) v = v.real();
}

}  // namespace

MatrixKernel build_circulant(const SpectralFunction& s, long n_sites) {
  if (n_sites < 2) throw Error(ErrorCode::InvalidArgument, "n_sites must be at least 2");
  const std::vector<double> a = s.sample(static_cast<std::size_t>(n_sites));
  auto d = std::make_shared<MatrixKernel::Data>();
  d->structure = MatrixKernel::Structure::circulant;
  d->n = n_sites;
  d->eig = Eigen::Map<const Eigen::VectorXd>(a.data(), n_sites);
  check_range(d->eig);
  std::call_once(d->eig_once, [] {});

  bool even = true;
  const long pair = 2 * (n_sites / 2);
  for (long j = pair - n_sites + 1; j < n_sites && even; ++j) even = a[j] == a[pair - j];
  d->real = even;
  d->gen = generator_from_samples(a);
  hermitize(d->gen, even);

  d->coords.resize(static_cast<std::size_t>(n_sites));
  for (long i = 0; i < n_sites; ++i) d->coords[static_cast<std::size_t>(i)] = i - n_sites / 2;
  std::uint64_t h = fnv1a64("circulant", 9);
  d->id = fnv1a64(d->gen.data(), d->gen.size() * sizeof(cplx), h);
  return MatrixKernel(std::move(d));
}

std::vector<double> circulant_spectrum(const MatrixKernel& k) {
  if (k.structure() != MatrixKernel::Structure::circulant) {
    throw Error(ErrorCode::InvalidArgument, "circulant_spectrum needs a circulant kernel");
  }
  std::vector<cplx> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, k.generator());
  const long n = k.n_sites();
  std::vector<double> a(out.size());
  for (long j = 0; j < n; ++j) a[static_cast<std::size_t>(j)] = out[dft_slot(j, n)].real();
  return a;
}

double PerturbationEnvelope::envelope(double r_abs) const {
  if (q.empty() || r_abs < 0.0) return 0.0;
  const double idx = std::floor(r_abs);
  if (idx >= double(q.size())) return 0.0;
  return q[static_cast<std::size_t>(idx)];
}

MatrixKernel perturb(const MatrixKernel& base, const PerturbationEnvelope& env) {
  const long n = base.n_sites();
  if (env.r.rows() != n || env.r.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "perturbation size does not match the kernel");
  }
  for (std::size_t i = 0; i < env.q.size(); ++i) {
    if (!std::isfinite(env.q[i]) || env.q[i] < 0.0 || (i > 0 && env.q[i] > env.q[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "envelope Q must be finite, nonnegative, decreasing");
    }
  }
  const auto coords = base.coordinates();
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      const double bound = env.envelope(double(std::abs(coords[i]) + std::abs(coords[j])));
      const double v = std::abs(env.r(i, j));
      if (v > bound * (1.0 + 1e-12) + 1e-300) {
        throw Error(ErrorCode::EnvelopeViolated,
                    "|R(" + std::to_string(coords[i]) + ", " + std::to_string(coords[j]) +
                        ")| = " + std::to_string(v) + " exceeds Q = " + std::to_string(bound));
      }
    }
  }
  if (env.r.cwiseAbs().maxCoeff() == 0.0 && base.structure() == MatrixKernel::Structure::dense) {
    return base;
  }
  Eigen::MatrixXcd sum = base.to_matrix() + env.r;
  return MatrixKernel::dense(sum, std::vector<long>(coords.begin(), coords.end()));
}

PerturbationEnvelope rank_one_damping(const MatrixKernel& k, double epsilon, double width,
                                      std::span<const long> window) {
  if (k.structure() != MatrixKernel::Structure::circulant) {
    throw Error(ErrorCode::InvalidArgument, "rank_one_damping needs a circulant base kernel");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0) || !(width > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= epsilon <= 1 and width > 0");
  }
  const long n = k.n_sites();
  const auto coords = k.coordinates();
  std::vector<cplx> w(static_cast<std::size_t>(n));
  double norm2 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double v = std::exp(-std::abs(double(coords[i])) / width);
    w[i] = v;
    norm2 += v * v;
  }
  for (auto& v : w) v /= std::sqrt(norm2);

  // u = K^{1/2} w through the circulant with symbol sqrt(A).
  const Eigen::VectorXd& a = k.eigenvalues();
  std::vector<double> root(static_cast<std::size_t>(n));
  for (long j = 0; j < n; ++j) root[j] = std::sqrt(std::max(0.0, a[j]));
  std::vector<cplx> c = generator_from_samples(root);
  Eigen::FFT<double> fft;
  std::vector<cplx> fc, fw, u;
  fft.fwd(fc, c);
  fft.fwd(fw, w);
  for (long j = 0; j < n; ++j) fc[j] *= fw[j];
  fft.inv(u, fc);
  if (k.is_real())
    for (auto& v : u) v = v.real();

  // G(r) = max_{|x| >= r} |u_x|, then Q(r) = eps G(0) G(ceil(r/2)).
  long rmax = 0;
  for (long x : coords) rmax = std::max(rmax, std::abs(x));
  std::vector<double> g(static_cast<std::size_t>(rmax + 1), 0.0);
  for (long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(std::abs(coords[i]));
    g[r] = std::max(g[r], std::abs(u[i]));
  }
  for (long r = rmax - 1; r >= 0; --r) g[r] = std::max(g[r], g[r + 1]);

  PerturbationEnvelope env;
  env.q.resize(static_cast<std::size_t>(2 * rmax + 1));
  for (long r = 0; r <= 2 * rmax; ++r) env.q[r] = epsilon * g[0] * g[(r + 1) / 2];

  const long m = static_cast<long>(window.size());
  Eigen::VectorXcd uw(m);
  for (long i = 0; i < m; ++i) uw[i] = u[window[i]];
  env.r = -epsilon * uw * uw.adjoint();
  return env;
}

}  // namespace dpp
