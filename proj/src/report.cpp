#include "degenmix/report.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "degenmix/util.hpp"

namespace degenmix {

void LongCsv::add(const std::string& series, double x, double y, double ci_lo, double ci_hi) {
  body_ += series;
  body_ += ",";
  body_ += fmt_double(x);
  body_ += ",";
  body_ += fmt_double(y);
  body_ += ",";
  body_ += fmt_double(ci_lo);
  body_ += ",";
  body_ += fmt_double(ci_hi);
  body_ += "\n";
}

std::string LongCsv::str() const { return "series,x,y,ci_lo,ci_hi\n" + body_; }

void ReportBundle::add_artifact(const std::string& name, const std::string& content) {
  artifacts[name] = content;
}

void ReportBundle::add_verdict(const std::string& name, bool pass) { verdicts[name] = pass; }

bool ReportBundle::all_pass() const {
  for (const auto& [name, ok] : verdicts)
    if (!ok) return false;
  return true;
}

void write_bundle(const ReportBundle& bundle, const Json& config, const std::string& status) {
  namespace fs = std::filesystem;
  fs::create_directories(bundle.outdir);

  Json manifest;
  manifest["status"] = status;
  manifest["config_hash"] = hex64(fnv1a64_bytes(config.dump()));
  manifest["hash_algorithm"] = "fnv1a64";
  auto now = std::chrono::system_clock::now().time_since_epoch();
  manifest["timestamp_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  manifest["artifacts"] = Json::array();

  auto emit = [&](const std::string& name, const std::string& content) {
    std::ofstream os(fs::path(bundle.outdir) / name, std::ios::binary);
    DGM_REQUIRE(os.good(), "write_bundle: cannot write " + name);
    os << content;
    Json entry;
    entry["name"] = name;
    entry["hash"] = hex64(fnv1a64_bytes(content));
    entry["bytes"] = content.size();
    manifest["artifacts"].push_back(entry);
  };

  for (const auto& [name, content] : bundle.artifacts) emit(name, content);
  if (!bundle.summary.is_null()) emit("summary.json", bundle.summary.dump(2) + "\n");

  Json verdicts = Json::object();
  for (const auto& [name, ok] : bundle.verdicts) verdicts[name] = ok;
  manifest["verdicts"] = verdicts;
  manifest["all_pass"] = bundle.all_pass();
  manifest["config"] = config;

  std::ofstream os(fs::path(bundle.outdir) / "manifest.json", std::ios::binary);
  DGM_REQUIRE(os.good(), "write_bundle: cannot write manifest.json");
  os << manifest.dump(2) << "\n";
}

int verify_bundle(const std::string& outdir) {
  namespace fs = std::filesystem;
  std::ifstream ms(fs::path(outdir) / "manifest.json");
  if (!ms.good()) return -1;
  Json manifest = Json::parse(ms);
  int mismatches = 0;
  for (const auto& entry : manifest["artifacts"]) {
    std::ifstream is(fs::path(outdir) / entry["name"].get<std::string>(), std::ios::binary);
    if (!is.good()) {
      ++mismatches;
      continue;
    }
    std::stringstream ss;
    ss << is.rdbuf();
    if (hex64(fnv1a64_bytes(ss.str())) != entry["hash"].get<std::string>()) ++mismatches;
  }
  return mismatches;
}

}  // namespace degenmix
