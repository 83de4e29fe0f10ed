// Command-line front end: cablegff <subcommand> [--config PATH] [--set k=v]...
// Exit codes: 0 ok, 1 verification failed, 2 configuration error, 3 I/O error.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cablegff/config.hpp"
#include "cablegff/experiments.hpp"
#include "cablegff/output.hpp"

extern char** environ;

namespace {

using namespace cablegff;
using Runner = ExperimentResult (*)(ExperimentContext&);

const std::vector<std::pair<std::string, std::vector<Runner>>>& subcommands() {
  static const std::vector<std::pair<std::string, std::vector<Runner>>> table{
      {"theta0", {run_theta0}},
      {"capacity", {run_capacity}},
      {"onearm", {run_onearm}},
      {"twopoint", {run_twopoint}},
      {"volume", {run_volume}},
      {"diffcheck", {run_diff_formula}},
      {"cominequality", {run_com_inequality}},
      {"locuniq", {run_emptiness, run_locuniq}},
      {"emptiness", {run_emptiness}},
      {"potential-selftest", {run_potential_selftest}},
      {"gff-selftest", {run_gff_selftest}},
  };
  return table;
}

void report(const ExperimentResult& r) {
  int verified = 0, failed = 0;
  for (const EstimateRecord& rec : r.records) {
    if (!rec.within_tolerance) continue;
    ++verified;
    if (*rec.within_tolerance) continue;
    ++failed;
    std::cout << "  FAIL " << rec.name;
    for (const auto& [k, v] : rec.parameters) std::cout << ' ' << k << '=' << v;
    std::cout << ": estimate " << rec.estimate;
    if (rec.reference) std::cout << " reference " << *rec.reference;
    std::cout << " tolerance " << rec.tolerance;
    if (!rec.note.empty()) std::cout << " (" << rec.note << ')';
    std::cout << '\n';
  }
  std::cout << r.experiment << ": " << r.records.size() << " records, " << verified
            << " verified, " << failed << " outside tolerance\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GFF cable-system percolation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = ".";
  std::vector<std::string> sets;
  int workers = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "configuration file ([lattice], [run], [grids])");
  app.add_option("--set", sets, "override key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  auto* w_opt = app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  auto* s_opt = app.add_option("--seed", seed, "master seed");

  std::vector<std::pair<CLI::App*, std::vector<Runner>>> commands;
  for (const auto& [name, runners] : subcommands())
    commands.emplace_back(app.add_subcommand(name, "run " + name), runners);
  CLI::App* all = app.add_subcommand("all", "run every experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ExperimentConfig config;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    std::map<std::string, std::string> env;
    for (char** e = environ; *e; ++e) {
      const std::string kv = *e;
      const auto eq = kv.find('=');
      if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    Overrides overrides = environment_overrides(env);
    for (auto& o : parse_override_list(sets)) overrides.push_back(std::move(o));
    if (*w_opt) overrides.emplace_back("workers", std::to_string(workers));
    if (*s_opt) overrides.emplace_back("seed", std::to_string(seed));
    config = parse_config(text, overrides);
    config.out_dir = out_dir;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  std::vector<Runner> runners;
  if (all->parsed()) {
    for (const auto& [name, rs] : subcommands())
      if (name != "emptiness")
        for (Runner r : rs) runners.push_back(r);
  } else {
    for (const auto& [cmd, rs] : commands)
      if (cmd->parsed()) runners = rs;
  }

  bool failed = false;
  try {
    std::filesystem::create_directories(out_dir);
    write_atomic(std::filesystem::path(out_dir) / "resolved_config.ini", echo_config(config));
    ExperimentContext ctx(config);
    for (Runner run : runners) {
      const ExperimentResult result = run(ctx);
      write_result(out_dir, result, config);
      report(result);
      failed = failed || result.failed();
    }
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return failed ? 1 : 0;
}
