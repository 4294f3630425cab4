#include "prefrank/runner/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "commands.hpp"
#include "prefrank/runner/config.hpp"
#include "prefrank/runner/manifest.hpp"

namespace prefrank::runner {
namespace {

using nlohmann::json;

std::uint64_t ParseUint(const std::string& text, const std::string& field) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(field, "expected non-negative integer, got '" + text + "'");
  }
  return v;
}

std::int64_t ParseInt(const std::string& text, const std::string& field) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(field, "expected integer, got '" + text + "'");
  }
  return v;
}

double ParseDouble(const std::string& text, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw ConfigError(field, "expected number, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> SplitList(const std::string& text, const std::string& field) {
  std::vector<std::string> parts;
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) {
    if (part.empty()) throw ConfigError(field, "empty element in list '" + text + "'");
    parts.push_back(part);
  }
  if (parts.empty() || text.back() == ',') throw ConfigError(field, "empty element in list '" + text + "'");
  return parts;
}

json FlagValue(const FlagSpec& spec, const std::string& text) {
  switch (spec.kind) {
    case FlagKind::kInt: return ParseInt(text, spec.key);
    case FlagKind::kUint: return ParseUint(text, spec.key);
    case FlagKind::kDouble: return ParseDouble(text, spec.key);
    case FlagKind::kString: return text;
    case FlagKind::kBool: return true;
    case FlagKind::kUintList: {
      json list = json::array();
      for (const auto& p : SplitList(text, spec.key)) list.push_back(ParseUint(p, spec.key));
      return list;
    }
    case FlagKind::kDoubleList: {
      json list = json::array();
      for (const auto& p : SplitList(text, spec.key)) list.push_back(ParseDouble(p, spec.key));
      return list;
    }
    case FlagKind::kStringList: return SplitList(text, spec.key);
  }
  throw std::logic_error("unhandled flag kind");
}

// Sets a dotted path inside `root`, creating objects on the way.
void SetPath(json& root, const std::string& dotted, json value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    if (dot == std::string::npos) {
      (*node)[dotted.substr(start)] = std::move(value);
      return;
    }
    node = &(*node)[dotted.substr(start, dot - start)];
    start = dot + 1;
  }
}

std::string Usage() {
  std::ostringstream s;
  s << "usage: prefrank <command> [options]\n\ncommands:\n";
  for (const auto& c : Commands()) {
    s << "  " << c.name << std::string(c.name.size() < 16 ? 16 - c.name.size() : 1, ' ') << c.help << "\n";
  }
  s << "\nRun 'prefrank <command> --help' for the options of a command.\n";
  return s.str();
}

void ReportError(std::ostream& err, const std::string& kind, const std::string& message,
                 const std::string& field = "") {
  json j = {{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  err << j.dump() << "\n";
}

// Raw values of one subcommand's options, filled by CLI11.
struct ParsedFlags {
  std::string config;
  std::string manifest;
  std::string out = "out";
  std::string seed;
  std::map<std::string, std::string> values;  // by flag name
  std::map<std::string, bool> switches;       // by flag name
  std::map<std::string, CLI::Option*> options;
  CLI::Option* seed_option = nullptr;
};

}  // namespace

std::vector<std::string> CommandNames() {
  std::vector<std::string> names;
  for (const auto& c : Commands()) names.push_back(c.name);
  return names;
}

json DefaultConfig(const std::string& command) {
  const Command* c = FindCommand(command);
  if (c == nullptr) throw std::invalid_argument("unknown command '" + command + "'");
  return c->defaults();
}

json ResolveConfig(const std::string& command, const std::optional<std::string>& env_seed, const json& file,
                   const json& flags) {
  json config = DefaultConfig(command);
  if (env_seed) MergeConfig(config, json{{"seed", ParseUint(*env_seed, "seed")}});
  MergeConfig(config, file);
  MergeConfig(config, flags);
  return config;
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    err << Usage();
    ReportError(err, "usage", "missing command");
    return kExitUsage;
  }
  const std::string first = argv[1];
  if (first == "-h" || first == "--help") {
    out << Usage();
    return kExitOk;
  }
  const Command* command = FindCommand(first);
  if (command == nullptr) {
    err << Usage();
    ReportError(err, "usage", "unknown command '" + first + "'");
    return kExitUsage;
  }

  CLI::App app{command->help, "prefrank " + command->name};
  ParsedFlags parsed;
  auto* config_opt = app.add_option("--config", parsed.config, "JSON config file (overrides defaults)");
  app.add_option("--manifest", parsed.manifest, "Replay the resolved config of an earlier manifest.json")
      ->excludes(config_opt);
  app.add_option("--out", parsed.out, "Output directory")->capture_default_str();
  parsed.seed_option = app.add_option("--seed", parsed.seed, "Seed for all randomness (default: $PREFRANK_SEED or 0)");
  for (const auto& spec : command->flags) {
    if (spec.kind == FlagKind::kBool) {
      parsed.options[spec.name] = app.add_flag("--" + spec.name, parsed.switches[spec.name], spec.help);
    } else {
      parsed.options[spec.name] = app.add_option("--" + spec.name, parsed.values[spec.name], spec.help);
    }
  }
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    ReportError(err, "usage", e.what());
    return kExitUsage;
  }

  RunManifest manifest;
  manifest.command = command->name;
  manifest.config = nullptr;
  manifest.git_describe = GitDescribe();
  const auto wall_start = std::chrono::system_clock::now();
  const auto steady_start = std::chrono::steady_clock::now();
  manifest.start_time = FormatTimestamp(wall_start);

  std::unique_ptr<OutputDir> dir;
  try {
    dir = std::make_unique<OutputDir>(parsed.out);
  } catch (const std::exception& e) {
    ReportError(err, "runtime", std::string("cannot create output directory: ") + e.what());
    return kExitRuntimeError;
  }

  int code = kExitOk;
  try {
    try {
      json file = json::object();
      if (!parsed.config.empty()) file = LoadConfigFile(parsed.config);
      if (!parsed.manifest.empty()) {
        const json m = LoadConfigFile(parsed.manifest);
        if (!m.contains("command") || !m.contains("config")) {
          throw ConfigError("<manifest>", "not a run manifest");
        }
        if (m["command"] != command->name) {
          throw ConfigError("command", "manifest was written by '" + m["command"].dump() + "'");
        }
        file = m["config"];
      }
      json flags = json::object();
      if (parsed.seed_option->count() > 0) flags["seed"] = ParseUint(parsed.seed, "seed");
      for (const auto& spec : command->flags) {
        if (parsed.options[spec.name]->count() == 0) continue;
        const std::string text = spec.kind == FlagKind::kBool ? "" : parsed.values[spec.name];
        SetPath(flags, spec.key, FlagValue(spec, text));
      }
      const char* env = std::getenv("PREFRANK_SEED");
      std::optional<std::string> env_seed;
      if (env != nullptr && *env != '\0') env_seed = env;
      manifest.config = ResolveConfig(command->name, env_seed, file, flags);
      manifest.seed = manifest.config.at("seed").get<std::uint64_t>();
      // Written before the run so an interrupted run still leaves a record.
      manifest.end_time = "";
      WriteManifest(dir->root(), manifest);
      const Execution execution = command->prepare(manifest.config);
      execution(*dir, out);
    } catch (const ConfigError& e) {
      code = kExitConfigError;
      manifest.error = e.what();
      ReportError(err, "config", e.what(), e.field());
    } catch (const std::exception& e) {
      code = kExitRuntimeError;
      manifest.error = e.what();
      ReportError(err, "runtime", e.what());
    }
    const auto wall_end = std::chrono::system_clock::now();
    manifest.end_time = FormatTimestamp(wall_end);
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - steady_start).count();
    manifest.outputs = dir->Records();
    WriteManifest(dir->root(), manifest);
  } catch (const std::exception& e) {
    ReportError(err, "runtime", std::string("cannot write manifest: ") + e.what());
    return kExitRuntimeError;
  }
  return code;
}

}  // namespace prefrank::runner
