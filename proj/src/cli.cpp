#include "dpplab/cli.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpplab/config.hpp"
#include "dpplab/error.hpp"
#include "dpplab/exact_stats.hpp"
#include "dpplab/experiments.hpp"
#include "dpplab/hash.hpp"
#include "dpplab/kernel.hpp"
#include "dpplab/sampler.hpp"

namespace dpp {

namespace {

using json = nlohmann::ordered_json;

const char* const kSubcommands[] = {"validate-kernel", "exact-stats",  "sample",      "clt-run",
                                    "variance-scan",   "m-scan",       "theorem2-run"};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, h);
  return buf;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::AdmissibilityLost:
    case ErrorCode::NotHermitian:
    case ErrorCode::EnvelopeViolated:
      return kExitAdmissibility;
    case ErrorCode::VarianceTooSmall:
    case ErrorCode::NumericallySingular:
    case ErrorCode::DegenerateProjection:
    case ErrorCode::SigmaZero:
    case ErrorCode::MZero:
    case ErrorCode::TooManySites:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  // Free-form rows (sample output) bypass the column count.
  std::vector<std::string> lines;
};

struct Artifact {
  Table table;
  json results = json::object();
  int code = kExitOk;
};

Artifact validate_kernel(const ParsedConfig& pc) {
  const auto& spec = pc.spec;
  Artifact a;
  const ValidationReport r = validate_spectral(spec.kernel);
  a.results["min_value"] = r.min_value;
  a.results["max_value"] = r.max_value;
  a.results["total_mass"] = r.total_mass;
  a.results["sigma2"] = r.sigma2;
  a.results["in_range"] = r.in_range;
  a.results["violations"] = r.violations;
  const long n = spec.n_sites_for(spec.L_grid.back());
  double roundtrip = std::numeric_limits<double>::quiet_NaN();
  if (r.in_range) {
    const MatrixKernel k = build_circulant(spec.kernel, n);
    const auto back = circulant_spectrum(k);
    const auto& eig = k.eigenvalues();
    roundtrip = 0.0;
    for (long j = 0; j < n; ++j) roundtrip = std::max(roundtrip, std::abs(back[j] - eig[j]));
    a.results["real_kernel"] = k.is_real();
  } else {
    a.code = kExitAdmissibility;
  }
  a.results["n_sites"] = n;
  a.results["roundtrip_error"] = jnum(roundtrip);
  a.table.columns = {"n_sites", "min_value", "max_value", "total_mass", "sigma2", "roundtrip_error", "admissible"};
  a.table.rows.push_back({std::to_string(n), num(r.min_value), num(r.max_value), num(r.total_mass),
                          num(r.sigma2), num(roundtrip), r.in_range ? "1" : "0"});
  return a;
}

Artifact exact_stats(const ParsedConfig& pc) {
  const auto& spec = pc.spec;
  Artifact a;
  const int order = spec.cumulant_order;
  a.table.columns = {"L", "n_sites", "exact_mean", "exact_var", "var_spectral"};
  for (int n = 1; n <= order; ++n) a.table.columns.push_back("c" + std::to_string(n));
  for (int n = 3; n <= order; ++n) a.table.columns.push_back("c" + std::to_string(n) + "_norm");
  json rows = json::array();
  for (double L : spec.L_grid) {
    const ExactRow r = exact_row(spec, L);
    std::vector<std::string> line = {num(r.L), std::to_string(r.n_sites), num(r.mean), num(r.var),
                                     num(r.var_spectral)};
    for (int n = 1; n <= order; ++n)
      line.push_back(r.cumulants.empty() ? "nan" : num(r.cumulants[static_cast<std::size_t>(n - 1)]));
    for (int n = 3; n <= order; ++n)
      line.push_back(r.c_norm.empty() ? "nan" : num(r.c_norm[static_cast<std::size_t>(n - 3)]));
    a.table.rows.push_back(std::move(line));
    json j = {{"L", r.L}, {"n_sites", r.n_sites}, {"exact_mean", r.mean}, {"exact_var", r.var},
              {"var_spectral", jnum(r.var_spectral)}};
    j["cumulants"] = r.cumulants;
    rows.push_back(j);
  }
  a.results["rows"] = rows;
  return a;
}

Artifact sample_configs(const ParsedConfig& pc) {
  const auto& spec = pc.spec;
  Artifact a;
  const double L = spec.L_grid.front();
  const long n = spec.n_sites_for(L);
  MatrixKernel k = build_circulant(spec.kernel, n);
  if (spec.perturbation.enabled) {
    std::vector<long> all(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    k = perturb(k, rank_one_damping(k, spec.perturbation.epsilon, spec.perturbation.width, all));
  }
  const auto configs = sample_batch(k, spec.n_samples, spec.seed, spec.workers);
  double total = 0.0;
  for (const auto& c : configs) {
    a.table.lines.push_back(to_csv_line(c));
    total += double(c.sites.size());
  }
  a.table.columns = {"seed", "site_count", "sites"};
  a.results["n_sites"] = n;
  a.results["n_samples"] = configs.size();
  a.results["kernel_id"] = hex(k.id());
  a.results["mean_site_count"] = configs.empty() ? json(nullptr) : json(total / double(configs.size()));
  return a;
}

Artifact clt(const ParsedConfig& pc) {
  const CltResult r = run_clt(pc.spec);
  Artifact a;
  a.table.columns = {"L",        "n_sites",  "exact_mean", "exact_var", "c3_norm", "c4_norm", "emp_mean",
                     "emp_var",  "emp_skew", "emp_kurt",   "ks_dist",   "n_samples", "seed"};
  json rows = json::array();
  bool gates = true;
  for (const auto& row : r.rows) {
    a.table.rows.push_back({num(row.L), std::to_string(row.n_sites), num(row.exact_mean), num(row.exact_var),
                            num(row.c3_norm()), num(row.c4_norm()), num(row.emp_mean), num(row.emp_var),
                            num(row.emp_skew), num(row.emp_kurt), num(row.ks_dist),
                            std::to_string(row.n_samples), std::to_string(row.seed)});
    gates = gates && row.mean_gate && row.var_gate;
    json cn = json::array();
    for (double v : row.c_norm) cn.push_back(jnum(v));
    rows.push_back({{"L", row.L},
                    {"exact_var", row.exact_var},
                    {"c_norm", cn},
                    {"ks_dist", jnum(row.ks_dist)},
                    {"ks_raw", jnum(row.ks_raw)},
                    {"mean_gate", row.mean_gate},
                    {"var_gate", row.var_gate}});
  }
  const Verdict v = clt_verdict(r);
  a.results["rows"] = rows;
  a.results["lattice_step"] = r.lattice_step;
  a.results["ks_continuity_corrected"] = r.lattice_step > 0.0;
  a.results["self_consistency_gates"] = gates;
  a.results["verdict"] = {{"result", v.pass ? "PASS" : "INCONCLUSIVE"},
                          {"reason", v.reason},
                          {"variance_eligible", v.variance_eligible},
                          {"final_bound", kVerdictFinalBound}};
  return a;
}

Artifact vscan(const ParsedConfig& pc) {
  const VarianceScan s = variance_scan(pc.spec);
  Artifact a;
  a.table.columns = {"L", "n_sites", "exact_var"};
  for (std::size_t i = 0; i < s.L.size(); ++i)
    a.table.rows.push_back({num(s.L[i]), std::to_string(s.n_sites[i]), num(s.var[i])});
  a.results["method"] = pc.spec.scan_method == ExperimentSpec::ScanMethod::spectral ? "spectral" : "lattice";
  a.results["fit_window_start_L"] = s.L[s.fit_from];
  a.results["log_fit"] = {{"slope", s.log_fit.slope}, {"intercept", s.log_fit.intercept},
                          {"rel_residual", s.log_fit.rel_residual}};
  a.results["power_fit"] = {{"exponent", s.power_fit.slope}, {"intercept", s.power_fit.intercept},
                            {"rel_residual", s.power_fit.rel_residual},
                            {"alpha_hat", 1.0 - s.power_fit.slope}};
  a.results["preferred"] = s.preferred;
  a.results["sigma2_ratio"] = jnum(s.sigma2_ratio);
  return a;
}

Artifact mscan(const ParsedConfig& pc) {
  if (pc.spec.lambda_grid.empty()) throw Error(ErrorCode::ValidationError, "grid.lambda: missing");
  const MScan s = m_scan(pc.spec.kernel, pc.spec.lambda_grid);
  Artifact a;
  a.table.columns = {"lambda", "m", "phi_ratio", "in_fit"};
  for (std::size_t i = 0; i < s.lambda.size(); ++i)
    a.table.rows.push_back({num(s.lambda[i]), num(s.m[i]), num(s.phi_ratio[i]), s.used[i] ? "1" : "0"});
  a.results["alpha_hat"] = s.alpha;
  a.results["rms_residual"] = s.rms_residual;
  a.results["lambda_floor"] = s.lambda_floor;
  return a;
}

Artifact theorem2(const ParsedConfig& pc) {
  const Theorem2Result r = theorem2_run(pc.spec);
  Artifact a;
  a.table.columns = {"L",       "n_sites",  "exact_mean", "exact_var", "center",  "center_discrepancy", "var_ratio",
                     "emp_mean", "emp_var", "emp_skew",   "emp_kurt",  "ks_dist", "n_samples",          "seed"};
  for (const auto& row : r.rows) {
    a.table.rows.push_back({num(row.L), std::to_string(row.n_sites), num(row.exact_mean), num(row.exact_var),
                            num(row.center), num(row.center_discrepancy), num(row.var_ratio), num(row.emp_mean),
                            num(row.emp_var), num(row.emp_skew), num(row.emp_kurt), num(row.ks_dist),
                            std::to_string(row.n_samples), std::to_string(row.seed)});
  }
  a.results["sigma2"] = r.sigma2;
  a.results["int_f2"] = r.int_f2;
  a.results["limit_variance"] = r.int_f2;
  return a;
}

std::string render_csv(const Table& t, const std::string& sub, std::uint64_t hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# dpplab " << kToolVersion << "\n";
  os << "# schema: " << sub << "/" << kSchemaVersion << "\n";
  os << "# config_hash: " << hex(hash) << "\n";
  os << "# seed: " << seed << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  for (const auto& l : t.lines) os << l << "\n";
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + p.string());
  out << text;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  json summary;
  summary["tool"] = "dpplab";
  summary["version"] = kToolVersion;
  summary["subcommand"] = cfg.subcommand;
  summary["schema"] = cfg.subcommand + "/" + std::to_string(kSchemaVersion);
  summary["config"] = cfg.config_path.string();

  auto emit_json = [&](const json& j) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    try {
      write_file(cfg.out_dir / (cfg.subcommand + ".json"), j.dump(2) + "\n");
    } catch (const Error& e) {
      log << e.what() << "\n";
    }
  };

  std::uint64_t seed = 0;
  try {
    bool known = false;
    for (const char* s : kSubcommands) known = known || cfg.subcommand == s;
    if (!known) throw Error(ErrorCode::InvalidArgument, "unknown subcommand '" + cfg.subcommand + "'");
    if (cfg.format != "csv" && cfg.format != "json") {
      throw Error(ErrorCode::InvalidArgument, "format must be csv or json");
    }
    if (cfg.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");
    ParsedConfig pc = load_config(cfg.config_path);
    if (cfg.seed) pc.spec.seed = *cfg.seed;
    pc.spec.workers = cfg.workers;
    seed = pc.spec.seed;
    summary["config_hash"] = hex(pc.hash);
    summary["seed"] = seed;
    summary["seed_override"] = cfg.seed.has_value();
    summary["kernel"] = pc.spec.kernel.describe();
    summary["statistic"] = pc.spec.statistic.describe();

    Artifact a;
    const std::string& sub = cfg.subcommand;
    if (sub == "validate-kernel") a = validate_kernel(pc);
    else if (sub == "exact-stats") a = exact_stats(pc);
    else if (sub == "sample") a = sample_configs(pc);
    else if (sub == "clt-run") a = clt(pc);
    else if (sub == "variance-scan") a = vscan(pc);
    else if (sub == "m-scan") a = mscan(pc);
    else a = theorem2(pc);

    std::filesystem::create_directories(cfg.out_dir);
    summary["status"] = a.code == kExitOk ? "ok" : "error";
    summary["exit_code"] = a.code;
    if (a.code == kExitAdmissibility) {
      summary["error"] = {{"code", "AdmissibilityLost"}, {"message", "spectral values leave [0, 1]"}};
      log << "AdmissibilityLost: spectral values leave [0, 1]\n";
    }
    summary["results"] = a.results;
    if (cfg.format == "csv") {
      write_file(cfg.out_dir / (sub + ".csv"), render_csv(a.table, sub, pc.hash, seed));
      summary["csv"] = (cfg.out_dir / (sub + ".csv")).string();
    } else {
      json rows = json::array();
      for (const auto& r : a.table.rows) {
        json o = json::object();
        for (std::size_t i = 0; i < r.size() && i < a.table.columns.size(); ++i) o[a.table.columns[i]] = r[i];
        rows.push_back(o);
      }
      for (const auto& l : a.table.lines) rows.push_back(l);
      summary["table"] = {{"columns", a.table.columns}, {"rows", rows}};
    }
    emit_json(summary);
    return a.code;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    summary["status"] = "error";
    summary["exit_code"] = code;
    summary["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    emit_json(summary);
    log << e.what() << "\n";
    return code;
  } catch (const std::exception& e) {
    summary["status"] = "error";
    summary["exit_code"] = kExitNumerical;
    summary["error"] = {{"code", "Internal"}, {"message", e.what()}};
    emit_json(summary);
    log << e.what() << "\n";
    return kExitNumerical;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Determinantal point field laboratory"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config, out = "out";
  std::uint64_t seed = 0;
  const char* const about[] = {"check the symbol and the circulant round trip",
                               "exact mean, variance and cumulants per L",
                               "draw configurations at the first L",
                               "exact cumulants plus Monte Carlo normality per L",
                               "variance growth fits over the L grid",
                               "exponent of m(lambda) near the origin",
                               "sigma L^(1/2) normalization with analytic centering"};
  for (std::size_t i = 0; i < std::size(kSubcommands); ++i) {
    CLI::App* sub = app.add_subcommand(kSubcommands[i], about[i]);
    sub->add_option("--config", config, "experiment config file")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "override mc.seed");
    sub->add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    cfg.subcommand = sub->get_name();
    if (sub->count("--seed")) cfg.seed = seed;
  }
  cfg.config_path = config;
  cfg.out_dir = out;
  return run(cfg, std::cerr);
}

}  // namespace dpp
