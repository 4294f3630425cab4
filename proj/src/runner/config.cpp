#include "prefrank/runner/config.hpp"

#include <fstream>
#include <sstream>

namespace prefrank::runner {
namespace {

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const char* TypeName(const nlohmann::json& v) {
  if (v.is_number_float()) return "number";
  if (v.is_number_unsigned()) return "non-negative integer";
  if (v.is_number_integer()) return "integer";
  return v.type_name();
}

// Whether `value` may replace `reference`.
bool Compatible(const nlohmann::json& reference, const nlohmann::json& value) {
  if (reference.is_number_float()) return value.is_number();
  if (reference.is_number_unsigned()) {
    return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  }
  if (reference.is_number_integer()) return value.is_number_integer();
  return reference.type() == value.type();
}

void CheckValue(const nlohmann::json& reference, const nlohmann::json& value, const std::string& path) {
  if (!Compatible(reference, value)) {
    throw ConfigError(path, std::string("expected ") + TypeName(reference) + ", got " + TypeName(value));
  }
  if (reference.is_array() && !reference.empty()) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      CheckValue(reference[0], value[i], path + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace

void MergeConfig(nlohmann::json& base, const nlohmann::json& overlay, const std::string& path) {
  if (!overlay.is_object()) {
    throw ConfigError(path.empty() ? "<root>" : path, std::string("expected object, got ") + overlay.type_name());
  }
  for (const auto& [key, value] : overlay.items()) {
    const std::string field = Join(path, key);
    if (!base.contains(key)) throw ConfigError(field, "unknown key");
    nlohmann::json& target = base[key];
    if (target.is_object()) {
      MergeConfig(target, value, field);
      continue;
    }
    CheckValue(target, value, field);
    // Keep float fields float so the resolved config has stable types.
    if (target.is_number_float()) {
      target = value.get<double>();
    } else if (target.is_array() && !target.empty() && target[0].is_number_float()) {
      target = value.get<std::vector<double>>();
    } else {
      target = value;
    }
  }
}

nlohmann::json LoadConfigFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const std::string body = text.str();
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", "invalid JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>", "config file must hold a JSON object");
  return j;
}

}  // namespace prefrank::runner
