#include "degenmix/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace degenmix {

namespace {

void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

Json parse_value(const std::string& s, std::size_t& i, int line);

Json parse_array(const std::string& s, std::size_t& i, int line) {
  Json arr = Json::array();
  ++i;  // consume '['
  for (;;) {
    skip_ws(s, i);
    if (i >= s.size()) throw ConfigError("toml line " + std::to_string(line) + ": unterminated array");
    if (s[i] == ']') {
      ++i;
      return arr;
    }
    arr.push_back(parse_value(s, i, line));
    skip_ws(s, i);
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
  }
}

Json parse_value(const std::string& s, std::size_t& i, int line) {
  skip_ws(s, i);
  if (i >= s.size()) throw ConfigError("toml line " + std::to_string(line) + ": missing value");
  char c = s[i];
  if (c == '[') return parse_array(s, i, line);
  if (c == '"') {
    std::string out;
    ++i;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      out += s[i++];
    }
    if (i >= s.size()) throw ConfigError("toml line " + std::to_string(line) + ": unterminated string");
    ++i;
    return Json(out);
  }
  std::size_t start = i;
  while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#') ++i;
  std::string tok = s.substr(start, i - start);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
  if (tok == "true") return Json(true);
  if (tok == "false") return Json(false);
  try {
    if (tok.find_first_of(".eE") == std::string::npos) {
      std::size_t pos = 0;
      long long v = std::stoll(tok, &pos);
      if (pos == tok.size()) return Json(v);
    }
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos == tok.size()) return Json(v);
  } catch (...) {
  }
  throw ConfigError("toml line " + std::to_string(line) + ": cannot parse value '" + tok + "'");
}

Json* descend(Json& root, const std::string& dotted, bool create) {
  Json* cur = &root;
  std::size_t pos = 0;
  while (pos < dotted.size()) {
    std::size_t dot = dotted.find('.', pos);
    std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!cur->is_object()) return nullptr;
    if (!cur->contains(key)) {
      if (!create) return nullptr;
      (*cur)[key] = Json::object();
    }
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

const Json* descend_const(const Json& root, const std::string& dotted) {
  const Json* cur = &root;
  std::size_t pos = 0;
  while (pos < dotted.size()) {
    std::size_t dot = dotted.find('.', pos);
    std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

}  // namespace

Json parse_toml(const std::string& text) {
  Json root = Json::object();
  Json* section = &root;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    // Strip comments outside strings.
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line = line.substr(0, i);
        break;
      }
    }
    std::size_t i = 0;
    skip_ws(line, i);
    if (i >= line.size()) continue;
    if (line[i] == '[') {
      std::size_t close = line.find(']', i);
      if (close == std::string::npos)
        throw ConfigError("toml line " + std::to_string(line_no) + ": bad section header");
      std::string name = line.substr(i + 1, close - i - 1);
      section = descend(root, name, true);
      if (!section) throw ConfigError("toml line " + std::to_string(line_no) + ": bad section path");
      continue;
    }
    std::size_t eq = line.find('=', i);
    if (eq == std::string::npos)
      throw ConfigError("toml line " + std::to_string(line_no) + ": expected key = value");
    std::string key = line.substr(i, eq - i);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty()) throw ConfigError("toml line " + std::to_string(line_no) + ": empty key");
    std::size_t vi = eq + 1;
    (*section)[key] = parse_value(line, vi, line_no);
  }
  return root;
}

Json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is.good()) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      return Json::parse(ss.str());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("json parse error: ") + e.what());
    }
  }
  return parse_toml(ss.str());
}

void apply_override(Json& cfg, const std::string& spec) {
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.to.key=value: " + spec);
  std::string path = spec.substr(0, eq);
  std::string value = spec.substr(eq + 1);
  Json* slot = descend(cfg, path, true);
  if (!slot) throw ConfigError("override path not addressable: " + path);
  try {
    *slot = Json::parse(value);
  } catch (...) {
    *slot = Json(value);  // bare strings allowed
  }
}

const Json& require_field(const Json& cfg, const std::string& dotted_path) {
  const Json* p = descend_const(cfg, dotted_path);
  if (!p) throw ConfigError("missing required config field: " + dotted_path);
  return *p;
}

double require_double(const Json& cfg, const std::string& path) {
  const Json& v = require_field(cfg, path);
  if (!v.is_number()) throw ConfigError("config field must be numeric: " + path);
  return v.get<double>();
}

long long require_int(const Json& cfg, const std::string& path) {
  const Json& v = require_field(cfg, path);
  if (!v.is_number_integer()) throw ConfigError("config field must be an integer: " + path);
  return v.get<long long>();
}

std::string require_string(const Json& cfg, const std::string& path) {
  const Json& v = require_field(cfg, path);
  if (!v.is_string()) throw ConfigError("config field must be a string: " + path);
  return v.get<std::string>();
}

double get_double(const Json& cfg, const std::string& path, double fallback) {
  const Json* p = descend_const(cfg, path);
  return p && p->is_number() ? p->get<double>() : fallback;
}

long long get_int(const Json& cfg, const std::string& path, long long fallback) {
  const Json* p = descend_const(cfg, path);
  return p && p->is_number_integer() ? p->get<long long>() : fallback;
}

std::string get_string(const Json& cfg, const std::string& path, const std::string& fallback) {
  const Json* p = descend_const(cfg, path);
  return p && p->is_string() ? p->get<std::string>() : fallback;
}

bool get_bool(const Json& cfg, const std::string& path, bool fallback) {
  const Json* p = descend_const(cfg, path);
  return p && p->is_boolean() ? p->get<bool>() : fallback;
}

}  // namespace degenmix
