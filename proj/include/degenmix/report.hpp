#pragma once

#include <map>
#include <string>
#include <vector>

#include "degenmix/config.hpp"

namespace degenmix {

// Plot-ready long-format CSV: series, x, y, ci_lo, ci_hi.
class LongCsv {
 public:
  void add(const std::string& series, double x, double y, double ci_lo = 0.0, double ci_hi = 0.0);
  std::string str() const;

 private:
  std::string body_;
};

struct ReportBundle {
  std::string outdir;
  Json summary = Json::object();                 // scenario summary (rate.json etc.)
  std::map<std::string, std::string> artifacts;  // filename -> content
  std::map<std::string, bool> verdicts;

  void add_artifact(const std::string& name, const std::string& content);
  void add_verdict(const std::string& name, bool pass);
  bool all_pass() const;
};

// Writes all artifacts plus summary.json and a manifest with per-file
// fnv1a64 content hashes, the config hash and timestamps.
void write_bundle(const ReportBundle& bundle, const Json& config, const std::string& status);

// Re-reads a bundle directory and checks every manifest hash. Returns the
// number of mismatching artifacts.
int verify_bundle(const std::string& outdir);

}  // namespace degenmix
