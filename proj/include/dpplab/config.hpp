#pragma once

// Experiment configuration: flat `key = value` lines with dotted keys.
//
//   kernel.spectral      = intervals([[-0.25, 0.25]]) | named("sine", rho=0.5)
//                          | named("triangle") | named("flat", value=0.5)
//                          | named("scaled_beta_union", beta=2, n_max=64)
//                          | "path/to/symbol.csv"   (two columns: frequency, value)
//   kernel.n_sites       = 4096                     (optional fixed torus size)
//   kernel.perturbation  = none | rank_one_damping(epsilon=0.05, width=2)
//   statistic.function   = indicator(0, 1) | gaussian(0, 0.5642) | bump(0, 1)
//                          | step_combo([[1, 0, 0.5], [2, 0.5, 1]])   (default indicator(0, 1))
//   grid.L               = [16, 32, 64] | geom(32, 1024, 6)
//   grid.window_factor   = 16
//   grid.lambda          = geom(1e-2, 1e-4, 9)
//   mc.n_samples         = 10000
//   mc.seed              = 1
//   mc.max_L             = 64                       (Monte Carlo only up to this L)
//   stats.cumulant_order = 4
//   scan.method          = lattice | spectral
//
// `#` starts a comment. Unknown keys are errors. kernel.spectral and grid.L
// are required.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dpplab/experiments.hpp"

namespace dpp {

struct ParsedConfig {
  ExperimentSpec spec;
  std::string kernel_decl;
  std::string statistic_decl;
  std::uint64_t hash = 0;  // FNV-1a of the raw text
};

// Collects every problem before throwing; the message lists them as
// "line N: key: why", separated by newlines. Syntax problems raise
// ParseError, semantic ones ValidationError.
ParsedConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

ParsedConfig load_config(const std::filesystem::path& path);

// Two-column CSV (frequency, value); '#' lines and a non-numeric header are skipped.
SpectralFunction load_spectral_csv(const std::filesystem::path& path);

}  // namespace dpp
