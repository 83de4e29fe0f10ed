#include "cablegff/output.hpp"

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <sstream>
#include <json.hpp>
#include <system_error>

#include "cablegff/config.hpp"

namespace cablegff {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

std::string table_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (const std::string& row : table.rows) {
    out += row;
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::ordered_json number(double x) {
  if (!std::isfinite(x)) return nullptr;  // JSON has no inf/nan
  return x;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  // Same keys and values as the echoed text form.
  nlohmann::ordered_json j;
  std::string section;
  std::istringstream in(echo_config(c));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      j[section] = nlohmann::ordered_json::object();
      continue;
    }
    const auto eq = line.find(" = ");
    j[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

}  // namespace

std::string summary_json(const ExperimentResult& result, const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["experiment"] = result.experiment;
  j["config"] = config_json(config);
  j["records"] = nlohmann::ordered_json::array();
  for (const EstimateRecord& r : result.records) {
    nlohmann::ordered_json rec;
    rec["name"] = r.name;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.parameters) params[k] = number(v);
    rec["parameters"] = params;
    rec["estimate"] = number(r.estimate);
    rec["stderr"] = number(r.stderr_);
    rec["n"] = r.n;
    rec["reference"] = r.reference ? number(*r.reference) : nullptr;
    rec["provenance"] = to_string(r.provenance);
    rec["within_tolerance"] =
        r.within_tolerance ? nlohmann::ordered_json(*r.within_tolerance) : nullptr;
    rec["tolerance"] = number(r.tolerance);
    rec["note"] = r.note;
    j["records"].push_back(std::move(rec));
  }
  j["failed"] = result.failed();
  j["build_info"] = {
      {"project", "cablegff"},
      {"version", "0.1.0"},
      {"compiler", __VERSION__},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
  };
  return j.dump(2) + "\n";
}

void write_result(const fs::path& dir, const ExperimentResult& result,
                  const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  write_atomic(dir / (result.experiment + ".csv"), table_csv(result.samples));
  write_atomic(dir / (result.experiment + ".json"), summary_json(result, config));
}

}  // namespace cablegff
