#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace degenmix {

using Json = nlohmann::json;

// Schema violations carry the offending field path; the CLI maps them to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal TOML subset: [dotted.sections], key = value with strings,
// booleans, numbers and (nested) arrays, # comments.
Json parse_toml(const std::string& text);

// Loads .toml or .json by extension.
Json load_config_file(const std::string& path);

// --override a.b.c=value (value parsed as JSON scalar/array, else string).
void apply_override(Json& cfg, const std::string& spec);

// Required-field accessors; throw ConfigError naming the path.
const Json& require_field(const Json& cfg, const std::string& dotted_path);
double require_double(const Json& cfg, const std::string& path);
long long require_int(const Json& cfg, const std::string& path);
std::string require_string(const Json& cfg, const std::string& path);

double get_double(const Json& cfg, const std::string& path, double fallback);
long long get_int(const Json& cfg, const std::string& path, long long fallback);
std::string get_string(const Json& cfg, const std::string& path, const std::string& fallback);
bool get_bool(const Json& cfg, const std::string& path, bool fallback);

}  // namespace degenmix
