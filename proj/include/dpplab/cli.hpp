#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace dpp {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitAdmissibility = 2, kExitNumerical = 3 };

struct RunConfig {
  std::string subcommand;
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  int workers = 1;
  std::string format = "csv";  // csv writes <sub>.csv and <sub>.json; json writes only <sub>.json
};

// Executes one subcommand and writes its artifacts; diagnostics go to `log`.
int run(const RunConfig& cfg, std::ostream& log);

// Command-line front end used by the dpplab executable.
int cli_main(int argc, char** argv);

}  // namespace dpp
