#include <doctest.h>

#include <cmath>
#include <random>

#include "dpplab/error.hpp"
#include "dpplab/exact_stats.hpp"
#include "oracles.hpp"

using namespace dpp;

namespace {

MatrixKernel diag_kernel(int n, double p) {
  return MatrixKernel::dense(Eigen::MatrixXd(p * Eigen::MatrixXd::Identity(n, n)));
}

MatrixKernel rank_one() { return MatrixKernel::dense(Eigen::MatrixXd(Eigen::MatrixXd::Constant(2, 2, 0.5))); }

}  // namespace

TEST_CASE("rho_n examples") {
  const MatrixKernel k = diag_kernel(10, 0.5);
  CHECK(rho_n(k, std::vector<long>{3}) == doctest::Approx(0.5));
  CHECK(rho_n(k, std::vector<long>{3, 7}) == doctest::Approx(0.25));
  CHECK(std::abs(rho_n(rank_one(), std::vector<long>{0, 1})) < 1e-15);
  try {
    rho_n(k, std::vector<long>{3, 3});
    FAIL("expected DuplicateSites");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateSites);
  }
}

TEST_CASE("mean and variance examples") {
  const MatrixKernel k = diag_kernel(4, 0.5);
  CHECK(mean_Sf(k, std::vector<double>(4, 1.0)) == doctest::Approx(2.0));
  CHECK(mean_Sf(k, std::vector<double>(4, 0.0)) == 0.0);
  const MatrixKernel p = diag_kernel(9, 0.3);
  std::vector<double> f(9, 0.0);
  for (int i = 2; i < 7; ++i) f[i] = 1.0;
  CHECK(var_Sf(p, f) == doctest::Approx(5 * 0.3 * 0.7).epsilon(1e-14));
  CHECK(std::abs(var_Sf(rank_one(), std::vector<double>{1.0, 1.0})) < 1e-15);
}

TEST_CASE("sine kernel mean on the 65-site window") {
  const MatrixKernel k = build_circulant(SpectralFunction::sine(0.5), 512);
  const auto f = TestFunction::indicator(-1.0, 1.0);
  const auto v = f.values_on(k.coordinates(), 32.0);
  double direct = 0, count = 0;
  for (long i = 0; i < k.n_sites(); ++i) {
    direct += v[i] * k.diagonal(i);
    count += v[i];
  }
  CHECK(count == 65);
  CHECK(mean_Sf(k, f, 32.0) == doctest::Approx(direct).epsilon(1e-14));
  // 257 of the 512 samples fall inside, so the density is 257/512.
  CHECK(mean_Sf(k, f, 32.0) == doctest::Approx(65 * 257 / 512.0).epsilon(1e-12));
  CHECK(mean_Sf(k, f, 32.0) == doctest::Approx(32.5).epsilon(0.01));
}

TEST_CASE("random kernel variance matches the pmf oracle") {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 5; ++t) {
    const auto m = oracle::random_kernel(8, gen, true);
    const auto f = oracle::random_f(8, gen);
    const MatrixKernel k = MatrixKernel::dense(m);
    const auto raw = oracle::pmf_raw_moments(oracle::complement_pmf(m), f, 2);
    const double var = raw[1] - raw[0] * raw[0];
    CHECK(oracle::rel_err(var_Sf(k, f), var) < 1e-10);
    CHECK(oracle::rel_err(mean_Sf(k, f), raw[0]) < 1e-10);
  }
}

TEST_CASE("cumulant_table examples") {
  const auto c = cumulant_table(diag_kernel(2, 0.5), std::vector<double>{1.0, 1.0}, 4);
  CHECK(c.c(1) == doctest::Approx(1.0));
  CHECK(c.c(2) == doctest::Approx(0.5));
  CHECK(std::abs(c.c(3)) < 1e-15);
  CHECK(c.c(4) == doctest::Approx(-0.25));
  std::mt19937_64 gen(3);
  const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(6, gen, true));
  const auto z = cumulant_table(k, std::vector<double>(6, 0.0), 8);
  for (int n = 1; n <= 8; ++n) CHECK(z.c(n) == 0.0);
  CHECK_THROWS_AS(cumulant_table(k, std::vector<double>(6, 1.0), 9), Error);
}

TEST_CASE("cumulant table invariants against Eqs for mean and variance") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 10; ++t) {
    const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(7, gen, t % 2));
    const auto f = oracle::random_f(7, gen);
    const auto c = cumulant_table(k, f, 6);
    CHECK(oracle::rel_err(c.c(1), mean_Sf(k, f)) <= 1e-10);
    CHECK(oracle::rel_err(c.c(2), var_Sf(k, f)) <= 1e-10);
    CHECK(std::isnan(c.c_norm(2)));
    CHECK(c.c_norm(4) == doctest::Approx(c.c(4) / (c.c(2) * c.c(2))));
  }
}

TEST_CASE("random 8-site kernel: cumulants match determinant finite differences") {
  std::mt19937_64 gen(99);
  const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(8, gen, true));
  const auto f = oracle::random_f(8, gen);
  const auto c = cumulant_table(k, f, 4);
  using q = __float128;
  auto g = [&](q t) { return charfn_logdet_quad(k, f, static_cast<double>(t)); };
  const std::complex<double> ipow[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int n = 1; n <= 4; ++n) {
    const auto d = oracle::richardson_derivative<q>(g, n, q(1e-3));
    const std::complex<double> dd(static_cast<double>(d.real()), static_cast<double>(d.imag()));
    const double fd = (dd / ipow[n % 4]).real();
    CHECK(oracle::rel_err(c.c(n), fd) < 1e-6);
  }
}

TEST_CASE("charfn_logdet examples") {
  const MatrixKernel k = diag_kernel(5, 0.3);
  const std::vector<double> one(5, 1.0);
  CHECK(std::abs(charfn_logdet(k, one, 0.0)) == 0.0);
  for (double t : {0.3, 1.1, 2.5}) {
    const std::complex<double> want = 5.0 * std::log(1.0 + 0.3 * (std::exp(std::complex<double>(0, t)) - 1.0));
    CHECK(std::abs(charfn_logdet(k, one, t) - want) < 1e-13);
  }
  std::mt19937_64 gen(4);
  const MatrixKernel r = MatrixKernel::dense(oracle::random_kernel(6, gen, true));
  const auto f = oracle::random_f(6, gen);
  const double h = 1e-4;
  const double fd = ((charfn_logdet(r, f, h) - charfn_logdet(r, f, -h)) / (2 * h)).imag();
  CHECK(std::abs(fd - mean_Sf(r, f)) < 1e-8);
}

TEST_CASE("brute force examples") {
  const auto d = brute_force_distribution(diag_kernel(2, 0.5));
  for (double p : d.prob) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_FALSE(d.kernel_at_one);

  const auto r = brute_force_distribution(rank_one());
  CHECK(r.kernel_at_one);
  CHECK(r.clip_perturbation > 0.0);
  CHECK(r.clip_perturbation <= 1e-12);
  CHECK(r.prob[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.prob[2] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(r.prob[0]) < 1e-6);
  CHECK(std::abs(r.prob[3]) < 1e-6);

  CHECK_THROWS_AS(brute_force_distribution(diag_kernel(13, 0.5)), Error);
}

TEST_CASE("brute force pmf sums to one and matches the trace formulas on 10 sites") {
  std::mt19937_64 gen(10);
  const auto m = oracle::random_kernel(10, gen, true);
  const MatrixKernel k = MatrixKernel::dense(m);
  const auto d = brute_force_distribution(k);
  double total = 0;
  for (double p : d.prob) total += p;
  CHECK(std::abs(total - 1.0) < 1e-10);
  const auto f = oracle::random_f(10, gen);
  const auto c = pmf_cumulants(d, f, 2);
  CHECK(oracle::rel_err(c[0], mean_Sf(k, f)) < 1e-9);
  CHECK(oracle::rel_err(c[1], var_Sf(k, f)) < 1e-9);
  const auto ref = oracle::complement_pmf(m);
  for (std::size_t s = 0; s < ref.size(); ++s) CHECK(std::abs(ref[s] - d.prob[s]) < 1e-12);
}

TEST_CASE("cumulants_to_moments examples") {
  const auto g = cumulants_to_moments(std::vector<double>{0, 1, 0, 0});
  CHECK(g.raw == std::vector<double>{0, 1, 0, 3});
  const auto c = cumulants_to_moments(std::vector<double>{2.5, 0, 0, 0});
  for (int r = 1; r <= 4; ++r) CHECK(c.raw[r - 1] == doctest::Approx(std::pow(2.5, r)));
  for (int r = 2; r <= 4; ++r) CHECK(c.central[r - 1] == 0.0);

  const MatrixKernel k = diag_kernel(2, 0.5);
  const std::vector<double> one(2, 1.0);
  const auto table = cumulant_table(k, one, 4);
  const auto mom = cumulants_to_moments(table);
  const auto direct = oracle::pmf_raw_moments(oracle::complement_pmf(k.to_matrix()), one, 4);
  for (int r = 0; r < 4; ++r) CHECK(std::abs(mom.raw[r] - direct[r]) < 1e-12);
  CHECK(mom.central[1] == doctest::Approx(table.c(2)));
}

TEST_CASE("nonnegativity, trace identity and repulsion") {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 10; ++t) {
    const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(9, gen, t % 2, 0.0, 1.0));
    const auto f = oracle::random_f(9, gen);
    CHECK(var_Sf(k, f) >= -1e-10);
    std::vector<double> window(9, 0.0);
    double diag = 0;
    for (int i = 2; i < 6; ++i) {
      window[i] = 1.0;
      diag += k.diagonal(i);
    }
    CHECK(mean_Sf(k, window) == diag);
    for (long i = 0; i < 9; ++i) {
      for (long j = i + 1; j < 9; ++j) {
        const double pair = rho_n(k, std::vector<long>{i, j});
        CHECK(pair >= -1e-10);
        CHECK(pair <= rho_n(k, std::vector<long>{i}) * rho_n(k, std::vector<long>{j}) + 1e-12);
      }
    }
    CHECK(rho_n(k, std::vector<long>{0, 3, 5, 8}) >= -1e-10);
  }
}

TEST_CASE("spectral variance agrees with the lattice formula") {
  const auto s = SpectralFunction::intervals({{-0.25, 0.25}});
  const auto f = TestFunction::gaussian(0.0, 1.0 / std::sqrt(M_PI));
  for (double L : {16.0, 32.0}) {
    const long n = static_cast<long>(64 * L);
    const MatrixKernel k = build_circulant(s, n);
    CHECK(var_spectral(s, f, L, n) == doctest::Approx(var_Sf(k, f, L)).epsilon(0.01));
  }
  CHECK(var_spectral(SpectralFunction::flat(1.0), f, 16.0, 1024) == doctest::Approx(0.0));
  CHECK_THROWS_AS(var_spectral(s, TestFunction::bump(0, 1), 16.0, 0), Error);
}
