#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

namespace prefrank::runner {

// Invalid configuration: unknown key, wrong value type, or a value that fails
// validation. `field` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Overlays `overlay` onto `base` in place. Every key in `overlay` must exist
// in `base` (recursively), and each value must have the type of the value it
// replaces: integers are accepted where floats are expected, and array
// elements are checked against the first element of the base array.
// `path` is the dotted prefix used in error messages.
void MergeConfig(nlohmann::json& base, const nlohmann::json& overlay, const std::string& path = "");

// Parses a JSON config file. An empty (or whitespace-only) file is an empty
// object. Throws ConfigError when the file cannot be read or parsed, or when
// the top level is not an object.
nlohmann::json LoadConfigFile(const std::string& path);

// Reads `key` (a dotted path) from a resolved config, converting to T.
// Conversion failures become ConfigError naming the path.
template <typename T>
T Get(const nlohmann::json& config, const std::string& key) {
  const nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError(key, "missing");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (node->is_number_integer() && !node->is_number_unsigned() && node->get<std::int64_t>() < 0) {
      throw ConfigError(key, "must be >= 0");
    }
  }
  try {
    return node->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace prefrank::runner
