#include "dpplab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "dpplab/error.hpp"
#include "dpplab/rng.hpp"

namespace dpp {

namespace {

constexpr std::uint64_t kRetryFlip = std::uint64_t(1) << 63;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

double phase_sign_abs(double v, double& mag) {
  mag = std::abs(v);
  return v < 0.0 ? -1.0 : 1.0;
}

cplx phase_sign_abs(cplx v, double& mag) {
  mag = std::abs(v);
  return mag == 0.0 ? cplx(1.0) : v / mag;
}

template <typename Scalar>
std::vector<long> project_sample(Mat<Scalar> v, RandomStream& rng) {
  const Eigen::Index n = v.rows();
  const Eigen::Index k = v.cols();
  std::vector<long> picked;
  picked.reserve(static_cast<std::size_t>(k));
  Eigen::VectorXd norms2 = v.rowwise().squaredNorm();

  for (Eigen::Index step = 0; step < k; ++step) {
    const Eigen::Index r = k - step;
    auto b = v.middleCols(step, r);
    const double total = norms2.sum();
    if (!(total > 0.5)) {
      throw Error(ErrorCode::DegenerateProjection,
                  "basis mass " + std::to_string(total) + " with " + std::to_string(r) + " columns left");
    }
    double u = rng.uniform() * total;
    Eigen::Index x = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (norms2[i] <= 0.0) continue;
      x = i;
      u -= norms2[i];
      if (u < 0.0) break;
    }
    if (x < 0) throw Error(ErrorCode::DegenerateProjection, "no site with positive weight");
    picked.push_back(static_cast<long>(x));

    // Householder reflector sending row x of the basis onto the first column.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = b.row(x).adjoint();
    const double alpha = y.norm();
    if (!(alpha > 0.0)) throw Error(ErrorCode::DegenerateProjection, "selected row vanished");
    double mag0 = 0.0;
    const Scalar ph = phase_sign_abs(y[0], mag0);
    y[0] += ph * alpha;
    const double uu = y.squaredNorm();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bu = b * y;
    b.noalias() -= (2.0 / uu) * bu * y.adjoint();

    norms2 -= b.col(0).cwiseAbs2();
    norms2[x] = 0.0;
    norms2 = norms2.cwiseMax(0.0);

    const Eigen::Index left = r - 1;
    if (left > 0 && (step + 1) % kReorthoInterval == 0) {
      auto rest = v.middleCols(step + 1, left);
      const Mat<Scalar> gram = rest.adjoint() * rest;
      const double drift = (gram - Mat<Scalar>::Identity(left, left)).cwiseAbs().maxCoeff();
      if (drift > kReorthoTol) {
        Eigen::HouseholderQR<Mat<Scalar>> qr(rest);
        rest = qr.householderQ() * Mat<Scalar>::Identity(n, left);
      }
      norms2 = rest.rowwise().squaredNorm();
      for (long p : picked) norms2[p] = 0.0;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

struct Sampler::Impl {
  std::uint64_t kernel_id = 0;
  Eigen::VectorXd lambda;
  bool real = true;
  Eigen::MatrixXd vr;
  Eigen::MatrixXcd vc;

  std::vector<Eigen::Index> select(RandomStream& rng) const {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      const double p = std::clamp(lambda[j], 0.0, 1.0);
      if (rng.uniform() < p) cols.push_back(j);
    }
    return cols;
  }

  std::vector<long> draw(RandomStream& rng) const {
    const auto cols = select(rng);
    if (cols.empty()) return {};
    if (real) {
      Eigen::MatrixXd v(vr.rows(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) v.col(c) = vr.col(cols[c]);
      return project_sample<double>(std::move(v), rng);
    }
    Eigen::MatrixXcd v(vc.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) v.col(c) = vc.col(cols[c]);
    return project_sample<cplx>(std::move(v), rng);
  }
};

Sampler::Sampler(const MatrixKernel& k) : impl_(std::make_unique<Impl>()) {
  impl_->kernel_id = k.id();
  const long n = k.n_sites();
  if (k.structure() == MatrixKernel::Structure::circulant) {
    if (n > kMaxDenseSites) throw Error(ErrorCode::TooManySites, "circulant too large to sample");
    // Fourier modes exp(2 pi i x m_j / N) / sqrt(N), m_j = j - floor(N/2).
    impl_->real = false;
    impl_->lambda = k.eigenvalues();
    impl_->vc.resize(n, n);
    const double norm = 1.0 / std::sqrt(double(n));
    for (long j = 0; j < n; ++j) {
      const long m = j - n / 2;
      for (long x = 0; x < n; ++x) {
        const double ang = 2.0 * std::numbers::pi * double((x * m) % n) / double(n);
        impl_->vc(x, j) = std::polar(norm, ang);
      }
    }
    return;
  }
  impl_->real = k.is_real();
  if (impl_->real) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.real_matrix());
    impl_->lambda = es.eigenvalues();
    impl_->vr = es.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(k.complex_matrix());
    impl_->lambda = es.eigenvalues();
    impl_->vc = es.eigenvectors();
  }
}

Sampler::~Sampler() = default;
Sampler::Sampler(Sampler&&) noexcept = default;

const Eigen::VectorXd& Sampler::eigenvalues() const { return impl_->lambda; }

Configuration Sampler::sample(std::uint64_t seed, std::uint64_t stream) const {
  Configuration c;
  c.kernel_id = impl_->kernel_id;
  c.seed = seed;
  c.stream = stream;
  try {
    RandomStream rng(seed, stream);
    c.sites = impl_->draw(rng);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateProjection) throw;
    RandomStream rng(seed, stream ^ kRetryFlip);
    c.sites = impl_->draw(rng);
  }
  return c;
}

long Sampler::sample_count(std::uint64_t seed, std::uint64_t stream) const {
  RandomStream rng(seed, stream);
  return static_cast<long>(impl_->select(rng).size());
}

Configuration sample(const MatrixKernel& k, std::uint64_t seed) { return Sampler(k).sample(seed, 0); }

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), 1, std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Configuration> sample_batch(const MatrixKernel& k, std::size_t n_samples,
                                        std::uint64_t base_seed, int workers) {
  std::vector<Configuration> out(n_samples);
  if (n_samples == 0) return out;
  const Sampler s(k);
  parallel_for(n_samples, workers, [&](std::size_t i) { out[i] = s.sample(base_seed, i); });
  return out;
}

CorrelationEstimate empirical_correlations(std::span<const Configuration> configs,
                                           std::span<const long> sites) {
  if (sites.empty() || sites.size() > 3) {
    throw Error(ErrorCode::InvalidArgument, "correlation order must be 1, 2 or 3");
  }
  std::vector<long> s(sites.begin(), sites.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    throw Error(ErrorCode::DuplicateSites, "correlation sites must be distinct");
  }
  CorrelationEstimate e;
  if (configs.empty()) return e;
  std::size_t hits = 0;
  for (const auto& c : configs) {
    bool all = true;
    for (long x : s) all = all && std::binary_search(c.sites.begin(), c.sites.end(), x);
    hits += all;
  }
  const double n = double(configs.size());
  e.value = double(hits) / n;
  e.std_error = std::sqrt(e.value * (1.0 - e.value) / n);
  return e;
}

std::string to_csv_line(const Configuration& c) {
  std::string line = std::to_string(c.seed) + "," + std::to_string(c.sites.size());
  for (long x : c.sites) line += "," + std::to_string(x);
  return line;
}

}  // namespace dpp
