// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "dpplab/cli.hpp"
#include "dpplab/config.hpp"
#include "dpplab/error.hpp"
#include "dpplab/exact_stats.hpp"
#include "dpplab/experiments.hpp"
#include "dpplab/sampler.hpp"
#include "dpplab/statistics.hpp"
#include "oracles.hpp"

using namespace dpp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ExperimentSpec spec_from(const std::string& text) { return parse_config(text).spec; }

constexpr const char* kGaussian = "gaussian(0, 0.5641895835477563)";  // exp(-pi x^2)

// Mean, variance and C_1..C_4 against the complement-determinant pmf; the
// library's L-ensemble pmf must also agree with both.
Outcome oracle_equivalence() {
  std::mt19937_64 gen(1001);
  std::uniform_int_distribution<int> size(2, 10);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = size(gen);
    const auto m = oracle::random_kernel(n, gen, t % 2 == 0);
    const auto f = oracle::random_f(n, gen);
    const MatrixKernel k = MatrixKernel::dense(m);
    const auto ref = oracle::moments_to_cumulants(oracle::pmf_raw_moments(oracle::complement_pmf(m), f, 4));
    const auto table = cumulant_table(k, f, 4);
    const auto bf = pmf_cumulants(brute_force_distribution(k), f, 4);
    worst = std::max({worst, oracle::rel_err(mean_Sf(k, f), ref[0]), oracle::rel_err(var_Sf(k, f), ref[1])});
    for (int c = 1; c <= 4; ++c) {
      worst = std::max(worst, oracle::rel_err(table.c(c), ref[c - 1]));
      worst = std::max(worst, oracle::rel_err(bf[c - 1], ref[c - 1]));
    }
  }
  return {worst < 1e-8, fmt("50 kernels, max relative error %.2e (limit 1e-8)", worst)};
}

Outcome determinant_cross_check() {
  std::mt19937_64 gen(2002);
  std::uniform_int_distribution<int> size(3, 8);
  using q = __float128;
  const std::complex<double> ipow[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = size(gen);
    const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(n, gen, t % 2 == 1));
    const auto f = oracle::random_f(n, gen);
    const auto table = cumulant_table(k, f, 4);
    auto g = [&](q s) { return charfn_logdet_quad(k, f, static_cast<double>(s)); };
    for (int c = 1; c <= 4; ++c) {
      const auto d = oracle::richardson_derivative<q>(g, c, q(1e-3));
      const std::complex<double> dd(static_cast<double>(d.real()), static_cast<double>(d.imag()));
      worst = std::max(worst, oracle::rel_err(table.c(c), (dd / ipow[c % 4]).real()));
    }
  }
  return {worst < 1e-5, fmt("20 kernels, max relative error %.2e (limit 1e-5)", worst)};
}

Outcome sampler_law() {
  std::mt19937_64 gen(3003);
  int good = 0;
  double min_p = 1.0;
  for (int t = 0; t < 10; ++t) {
    const auto m = oracle::random_kernel(6, gen, t % 2 == 0);
    const MatrixKernel k = MatrixKernel::dense(m);
    std::vector<std::size_t> counts(64, 0);
    for (const auto& c : sample_batch(k, 100000, 500 + t)) {
      std::size_t mask = 0;
      for (long s : c.sites) mask |= std::size_t{1} << s;
      ++counts[mask];
    }
    const double p = chi_square_test(counts, oracle::complement_pmf(m)).p_value;
    min_p = std::min(min_p, p);
    good += p > 0.001;
  }
  return {good >= 9, fmt("%.0f/10 kernels with p > 0.001 (need 9), smallest p %.3g", good, min_p)};
}

const char* kSineScan = R"(
kernel.spectral    = named("sine", rho=0.5)
statistic.function = indicator(0, 1)
grid.L             = [32, 64, 128, 256, 512, 1024]
grid.window_factor = 16
mc.n_samples       = 10000
mc.seed            = 20240601
)";

Outcome log_law() {
  const VarianceScan s = variance_scan(spec_from(kSineScan));
  const double target = 1.0 / (M_PI * M_PI);
  const double rel = std::abs(s.log_fit.slope - target) / target;
  return {rel < 0.15 && s.preferred == "log",
          fmt("slope %.5f vs 1/pi^2 = %.5f (%.1f%% off, limit 15%%), ", s.log_fit.slope, target, 100 * rel) +
              "preferred fit: " + s.preferred};
}

Outcome clt() {
  const CltResult r = run_clt(spec_from(kSineScan));
  const CltRow& row = r.rows.back();
  const bool ok = row.ks_dist < 0.02 && std::abs(row.emp_skew) < 0.1 && std::abs(row.emp_kurt) < 0.15 &&
                  row.mean_gate && row.var_gate;
  return {ok, fmt("L = %.0f: KS %.4f (continuity corrected; raw %.4f), skew %+.4f, ", row.L, row.ks_dist, row.ks_raw,
                  row.emp_skew) +
                  fmt("excess kurtosis %+.4f", row.emp_kurt)};
}

bool normal_gates(double ks, double skew, double kurt) {
  return ks < 0.02 && std::abs(skew) < 0.1 && std::abs(kurt) < 0.15;
}

Outcome smooth_symbol() {
  const Theorem2Result r = theorem2_run(spec_from(std::string(R"(
kernel.spectral    = named("triangle")
statistic.function = )") + kGaussian + R"(
grid.L             = [8, 16, 32, 64, 128, 256, 512]
grid.window_factor = 64
mc.n_samples       = 10000
mc.max_L           = 32
mc.seed            = 7
)"));
  const bool analytic = std::abs(r.sigma2 - 1.0 / 6.0) < 1e-9 && std::abs(r.int_f2 - 1.0 / std::sqrt(2.0)) < 1e-9;
  const Theorem2Row& last = r.rows.back();
  const bool ratio_ok = last.var_ratio >= 0.95 && last.var_ratio <= 1.05;
  const Theorem2Row* mc = nullptr;
  for (const auto& row : r.rows)
    if (row.n_samples > 0) mc = &row;
  bool gates = mc != nullptr;
  if (mc) {
    const double n = double(mc->n_samples);
    // Normalized statistic: mean ~ 0 and variance ~ Var / (sigma^2 L) within MC error.
    const double target_var = mc->exact_var / (r.sigma2 * mc->L);
    const double mean_shift = (mc->exact_mean - mc->center) / std::sqrt(r.sigma2 * mc->L);
    gates = normal_gates(mc->ks_dist, mc->emp_skew, mc->emp_kurt) &&
            std::abs(mc->emp_mean - mean_shift) < 5 * std::sqrt(target_var / n) &&
            std::abs(mc->emp_var - target_var) < 5 * target_var * std::sqrt(2.0 / (n - 1) + std::max(0.0, mc->emp_kurt) / n);
  }
  std::string detail = fmt("Var/(sigma^2 L int f^2) = %.5f at L = %.0f; ", last.var_ratio, last.L);
  if (mc) {
    detail += fmt("MC at L = %.0f: KS %.4f, skew %+.4f, kurt %+.4f", mc->L, mc->ks_dist, mc->emp_skew, mc->emp_kurt);
  }
  return {analytic && ratio_ok && gates, detail};
}

Outcome power_law() {
  const auto spec = spec_from(std::string(R"(
kernel.spectral    = named("scaled_beta_union", beta=2, n_max=64)
statistic.function = )") + kGaussian + R"(
grid.L             = geom(128, 8192, 7)
grid.lambda        = geom(1e-3, 1e-5, 16)
grid.window_factor = 64
scan.method        = spectral
)");
  const MScan m = m_scan(spec.kernel, spec.lambda_grid);
  const VarianceScan v = variance_scan(spec);
  const double growth = v.power_fit.slope;
  const bool ok = std::abs(m.alpha - 0.5) <= 0.05 && std::abs(growth - 0.5) <= 0.07;
  return {ok, fmt("m_scan alpha %.4f (0.5 +- 0.05), variance exponent %.4f (0.5 +- 0.07)", m.alpha, growth)};
}

Outcome two_interval() {
  const CltResult r = run_clt(spec_from(std::string(R"(
kernel.spectral    = intervals([[-0.4, -0.1], [0.1, 0.4]])
statistic.function = )") + kGaussian + R"(
grid.L             = [4, 8, 16, 32, 64, 128]
grid.window_factor = 64
mc.n_samples       = 10000
mc.max_L           = 16
mc.seed            = 11
)"));
  const double limit = 1.0 / M_PI;  // l / (2 pi), l = 2
  const auto& rows = r.rows;
  const double last = rows.back().exact_var;
  const double prev = rows[rows.size() - 2].exact_var;
  const bool converges = std::abs(last - prev) / last < 1e-6;
  const double rel = std::abs(last - limit) / limit;
  const CltRow* mc = nullptr;
  for (const auto& row : rows)
    if (row.n_samples > 0) mc = &row;
  const bool gates = mc && normal_gates(mc->ks_dist, mc->emp_skew, mc->emp_kurt) && mc->mean_gate && mc->var_gate;
  std::string detail = fmt("Var %.6f at L = %.0f vs 1/pi = %.6f (%.2f%% off, limit 5%%); ", last, rows.back().L, limit,
                           100 * rel);
  if (mc) detail += fmt("MC at L = %.0f: KS %.4f, skew %+.4f, kurt %+.4f", mc->L, mc->ks_dist, mc->emp_skew, mc->emp_kurt);
  return {converges && rel < 0.05 && gates, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome invariants() {
  int checks = 0, failed = 0;
  std::string first_failure;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failed;
      if (first_failure.empty()) first_failure = what;
    }
  };

  // Kernel construction: Hermiticity, eigenvalue range, circulant round trip.
  const std::vector<SpectralFunction> symbols = {
      SpectralFunction::sine(0.5), SpectralFunction::triangle(), SpectralFunction::flat(0.5),
      SpectralFunction::intervals({{-0.4, -0.1}, {0.1, 0.4}}), SpectralFunction::intervals({{0.05, 0.3}}),
      SpectralFunction::scaled_beta_union(2.0, 64),
      SpectralFunction::tabulated({-0.5, -0.1, 0.2, 0.5}, {0.1, 0.9, 0.3, 0.1})};
  std::mt19937_64 gen(4004);
  std::uniform_real_distribution<double> lam(-0.5, 0.5);
  for (const auto& s : symbols) {
    for (long n : {9L, 128L}) {
      const MatrixKernel k = build_circulant(s, n);
      const Eigen::MatrixXcd m = k.to_matrix();
      expect(m == m.adjoint(), "Hermitian " + s.describe());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
      expect(es.eigenvalues().minCoeff() >= -kEigTol && es.eigenvalues().maxCoeff() <= 1 + kEigTol,
             "eigenvalue range " + s.describe());
      const auto back = circulant_spectrum(k);
      const auto a = s.sample(static_cast<std::size_t>(n));
      double err = 0;
      for (long j = 0; j < n; ++j) err = std::max(err, std::abs(back[j] - a[j]));
      expect(err <= 1e-12, "round trip " + s.describe());
    }
    // m(lambda) symmetry, m(0) = sigma^2, 0 <= m <= total mass.
    const double tol = s.kind() == SpectralFunction::Kind::interval_union ? 1e-12 : 1e-9;
    expect(std::abs(m_lambda(s, 0.0) - sigma2(s)) <= tol, "m(0) = sigma^2 " + s.describe());
    if (s.kind() == SpectralFunction::Kind::interval_union) expect(sigma2(s) == 0.0, "indicator sigma^2");
    for (int i = 0; i < 20; ++i) {
      const double l = lam(gen);
      const double v = m_lambda(s, l);
      expect(std::abs(v - m_lambda(s, -l)) <= 1e-12, "m symmetry " + s.describe());
      expect(v >= -1e-15 && v <= s.total_mass() + 1e-12, "m bounds " + s.describe());
    }
  }
  for (int t = 0; t < 10; ++t) {
    const MatrixKernel k = MatrixKernel::dense(oracle::random_kernel(9, gen, t % 2 == 0, 0.0, 1.0));
    const auto f = oracle::random_f(9, gen);
    expect(var_Sf(k, f) >= -1e-10, "variance nonnegative");
    // Trace identity: the diagonal over a window is the mean of its count.
    std::vector<double> window(9, 0.0);
    double diag = 0;
    for (int i = 1; i < 7; ++i) {
      window[i] = 1.0;
      diag += k.diagonal(i);
    }
    expect(mean_Sf(k, window) == diag, "trace identity");
    for (long i = 0; i < 9; ++i)
      for (long j = i + 1; j < 9; ++j) {
        const double pair = rho_n(k, std::vector<long>{i, j});
        expect(pair >= -1e-10, "rho_2 nonnegative");
        expect(pair <= rho_n(k, std::vector<long>{i}) * rho_n(k, std::vector<long>{j}) + 1e-12, "repulsion");
      }
    const auto table = cumulant_table(k, f, 4);
    expect(oracle::rel_err(table.c(1), mean_Sf(k, f)) <= 1e-10, "C1 = mean");
    expect(oracle::rel_err(table.c(2), var_Sf(k, f)) <= 1e-10, "C2 = var");
  }

  // Sampling determinism, independent of worker count.
  const MatrixKernel k = build_circulant(SpectralFunction::triangle(), 96);
  const auto a = sample_batch(k, 64, 5, 1);
  const auto b = sample_batch(k, 64, 5, 4);
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].sites == b[i].sites;
  expect(same, "sample_batch determinism");

  // CLI output determinism.
  const fs::path dir = fs::temp_directory_path() / "dpplab_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.conf") << "kernel.spectral = named(\"sine\", rho=0.5)\n"
                                     "statistic.function = indicator(0, 1)\n"
                                     "grid.L = [16, 32, 64]\nmc.n_samples = 400\nmc.seed = 3\n";
  for (const std::string sub : {"clt-run", "sample"}) {
    std::string first;
    for (int w : {1, 2, 1}) {
      RunConfig cfg;
      cfg.subcommand = sub;
      cfg.config_path = dir / "run.conf";
      cfg.workers = w;
      cfg.out_dir = dir / ("w" + std::to_string(w));
      std::ostringstream log;
      expect(run(cfg, log) == kExitOk, sub + " exit code");
      const std::string csv = slurp(cfg.out_dir / (sub + ".csv"));
      if (first.empty()) first = csv;
      expect(csv == first && !csv.empty(), sub + " byte-identical");
      expect(csv.find("# config_hash: 0x") != std::string::npos && csv.find("# seed: 3") != std::string::npos &&
                 csv.rfind("# dpplab 0.1.0", 0) == 0,
             sub + " provenance header");
    }
  }
  fs::remove_all(dir);

  std::string detail = std::to_string(checks - failed) + "/" + std::to_string(checks) + " property checks";
  if (failed) detail += "; first failure: " + first_failure;
  return {failed == 0, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"determinant cross-check", determinant_cross_check},
      {"sampler law", sampler_law},
      {"log-law variance growth", log_law},
      {"counting-statistic CLT", clt},
      {"smooth-symbol limit law", smooth_symbol},
      {"power-law exponent", power_law},
      {"two-interval limit variance", two_interval},
      {"invariant suite", invariants},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("[%s] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures ? 1 : 0;
}
