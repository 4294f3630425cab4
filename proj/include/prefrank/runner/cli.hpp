#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prefrank::runner {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntimeError = 1,
  kExitUsage = 2,
  kExitConfigError = 3,
};

// Subcommand names in usage order.
std::vector<std::string> CommandNames();

// Default config of a subcommand. Throws std::invalid_argument for an unknown
// name.
nlohmann::json DefaultConfig(const std::string& command);

// defaults < `env_seed` (the PREFRANK_SEED value, seed only) < `file` <
// `flags`. Throws ConfigError naming the first bad field.
nlohmann::json ResolveConfig(const std::string& command, const std::optional<std::string>& env_seed,
                             const nlohmann::json& file, const nlohmann::json& flags);

// Entry point of the `prefrank` tool. Progress goes to `out`; failures are
// reported on `err` as one JSON line {"error", "message"[, "field"]}. Every
// run that gets as far as an output directory leaves a manifest.json there,
// including failed runs.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prefrank::runner
