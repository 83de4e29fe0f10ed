#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "cablegff/experiments.hpp"

namespace cablegff {

// Filesystem failure while writing results (exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string table_csv(const Table& table);
// {experiment, config, records[], build_info}; floats round-trip exactly.
std::string summary_json(const ExperimentResult& result, const ExperimentConfig& config);

// <dir>/<experiment>.csv and <dir>/<experiment>.json.
void write_result(const std::filesystem::path& dir, const ExperimentResult& result,
                  const ExperimentConfig& config);

}  // namespace cablegff
