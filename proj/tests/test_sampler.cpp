#include <doctest.h>

#include <cmath>
#include <random>

#include "dpplab/exact_stats.hpp"
#include "dpplab/rng.hpp"
#include "dpplab/sampler.hpp"
#include "dpplab/statistics.hpp"
#include "oracles.hpp"

using namespace dpp;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
  RandomStream u(1, 5);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 5 * std::sqrt(1.0 / 12 / 100000));
}

TEST_CASE("sample examples") {
  const MatrixKernel id = MatrixKernel::dense(Eigen::MatrixXd(Eigen::MatrixXd::Identity(7, 7)));
  for (std::uint64_t s : {1ULL, 2ULL, 99ULL}) CHECK(sample(id, s).sites.size() == 7);
  const MatrixKernel zero = MatrixKernel::dense(Eigen::MatrixXd(Eigen::MatrixXd::Zero(7, 7)));
  CHECK(sample(zero, 3).sites.empty());

  const MatrixKernel r1 = MatrixKernel::dense(Eigen::MatrixXd(Eigen::MatrixXd::Constant(2, 2, 0.5)));
  const auto configs = sample_batch(r1, 100000, 11);
  std::size_t at0 = 0;
  for (const auto& c : configs) {
    REQUIRE(c.sites.size() == 1);
    at0 += c.sites[0] == 0;
  }
  const double p = double(at0) / 1e5;
  CHECK(std::abs(p - 0.5) < 3 * std::sqrt(0.25 / 1e5));
  const auto both = empirical_correlations(configs, std::vector<long>{0, 1});
  CHECK(both.value == 0.0);
}

TEST_CASE("sample_batch determinism") {
  std::mt19937_64 gen(1);
  const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(12, gen, true));
  const auto a = sample_batch(k, 3, 7);
  const auto b = sample_batch(k, 3, 7);
  REQUIRE(a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].sites == b[i].sites);
    CHECK(a[i].stream == std::uint64_t(i));
    CHECK(a[i].seed == 7);
  }
  const auto many1 = sample_batch(k, 200, 9, 1);
  const auto many4 = sample_batch(k, 200, 9, 4);
  for (int i = 0; i < 200; ++i) CHECK(many1[i].sites == many4[i].sites);
  CHECK(sample_batch(k, 0, 7).empty());
  CHECK(to_csv_line(a[0]).rfind("7," + std::to_string(a[0].sites.size()), 0) == 0);
}

TEST_CASE("configurations are sorted, distinct and in range") {
  const MatrixKernel k = build_circulant(SpectralFunction::triangle(), 200);
  for (const auto& c : sample_batch(k, 50, 3)) {
    for (std::size_t i = 0; i + 1 < c.sites.size(); ++i) REQUIRE(c.sites[i] < c.sites[i + 1]);
    if (!c.sites.empty()) {
      CHECK(c.sites.front() >= 0);
      CHECK(c.sites.back() < 200);
    }
  }
}

TEST_CASE("disjoint seeds show no lag-1 occupancy correlation") {
  const MatrixKernel k = MatrixKernel::dense(Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(4, 4)));
  const auto a = sample_batch(k, 20000, 100);
  const auto b = sample_batch(k, 20000, 101);
  // Occupancy of site 0 in a[i] versus b[i]: independent fair coins.
  double cov = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = (!a[i].sites.empty() && a[i].sites[0] == 0) ? 0.5 : -0.5;
    const double y = (!b[i].sites.empty() && b[i].sites[0] == 0) ? 0.5 : -0.5;
    cov += x * y;
  }
  cov /= double(a.size());
  CHECK(std::abs(cov) < 3 * 0.25 / std::sqrt(double(a.size())));
}

TEST_CASE("empirical correlations") {
  const MatrixKernel half = MatrixKernel::dense(Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(8, 8)));
  const auto configs = sample_batch(half, 10000, 5);
  const auto e = empirical_correlations(configs, std::vector<long>{3});
  CHECK(std::abs(e.value - 0.5) < 3 * e.std_error);

  const MatrixKernel sine = build_circulant(SpectralFunction::sine(0.5), 16);
  const auto sc = sample_batch(sine, 100000, 6);
  const std::vector<long> pair{7, 8};
  const auto est = empirical_correlations(sc, pair);
  CHECK(std::abs(est.value - rho_n(sine, pair)) < 3 * est.std_error);
}

TEST_CASE("cardinality law") {
  const MatrixKernel k = build_circulant(SpectralFunction::triangle(), 128);
  const Sampler s(k);
  double sum = 0, sum2 = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double c = double(s.sample(2, i).sites.size());
    CHECK(s.sample_count(2, i) == long(c));
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const auto& lam = k.eigenvalues();
  CHECK(std::abs(mean - lam.sum()) < 3 * std::sqrt(var / n));
}

TEST_CASE("six-site law matches the exact pmf") {
  std::mt19937_64 gen(2024);
  const auto m = oracle::random_kernel(6, gen, true);
  const MatrixKernel k = MatrixKernel::dense(m);
  const auto pmf = oracle::complement_pmf(m);
  std::vector<std::size_t> counts(64, 0);
  for (const auto& c : sample_batch(k, 20000, 31)) {
    std::size_t mask = 0;
    for (long s : c.sites) mask |= std::size_t{1} << s;
    ++counts[mask];
  }
  CHECK(chi_square_test(counts, pmf).p_value > 0.001);
}

TEST_CASE("statistics helpers") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021).epsilon(1e-6));
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = sample_moments(x);
  CHECK(m.mean == 2.5);
  CHECK(m.var == doctest::Approx(5.0 / 3.0));
  CHECK(m.skew == doctest::Approx(0.0));
  const auto fit = linear_fit(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5});
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(lattice_step(std::vector<double>{0, 2, 4, -6}).value() == doctest::Approx(2.0));
  CHECK_FALSE(lattice_step(std::vector<double>{0.3, 1.0, std::sqrt(2.0)}).has_value());
  // Perfectly normal quantiles give a KS distance of order 1/n.
  std::vector<double> q;
  for (int i = 1; i < 1000; ++i) {
    double lo = -10, hi = 10;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < i / 1000.0 ? lo : hi) = mid;
    }
    q.push_back(lo);
  }
  CHECK(ks_normal(q, 0.0, 1.0) < 2e-3);
}
