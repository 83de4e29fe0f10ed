#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cablegff/experiments.hpp"

namespace cablegff {

// Bad or incomplete configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered key=value overrides applied after the file ("run.n=500" or "n=500").
using Overrides = std::vector<std::pair<std::string, std::string>>;

// Sections [lattice], [run], [grids]; '#' and ';' start comments. Grids take
// comma lists and start:step:stop ranges. d, L and seed are mandatory (from
// the text or the overrides). Unknown keys and out-of-window grids throw.
ExperimentConfig parse_config(const std::string& text, const Overrides& overrides = {});

Overrides parse_override_list(const std::vector<std::string>& items);  // "k=v"
// CABLEGFF_<KEY>=value, key matched case-insensitively.
Overrides environment_overrides(const std::map<std::string, std::string>& env);

std::vector<double> expand_range(const std::string& spec);

void validate(const ExperimentConfig& config);

// The resolved configuration in the input syntax; parses back to itself.
std::string echo_config(const ExperimentConfig& config);

// All recognised keys, in echo order.
const std::vector<std::string>& config_keys();

}  // namespace cablegff
