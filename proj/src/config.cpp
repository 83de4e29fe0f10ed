#include "cablegff/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace cablegff {

namespace {

std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string shortest(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || std::isnan(out))
    throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return out;
}

std::vector<double> double_list(const std::string& key, const std::string& v) {
  try {
    return expand_range(v);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

std::vector<int> int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (double x : double_list(key, v)) {
    if (x != std::floor(x) || std::abs(x) > 1e9)
      throw ConfigError("key '" + key + "': integer grid expected");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) out += shortest(xs[i]);
    else out += std::to_string(xs[i]);
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define CG_DOUBLE(sec, key, field)                                                             \
  Key {                                                                                        \
    sec, key, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(key, v); }, \
        [](const ExperimentConfig& c) { return shortest(c.field); }                            \
  }
#define CG_INT(sec, key, field, type)                                                          \
  Key {                                                                                        \
    sec, key,                                                                                  \
        [](ExperimentConfig& c, const std::string& v) {                                        \
          c.field = static_cast<type>(to_integer(key, v));                                     \
        },                                                                                     \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                      \
  }
#define CG_DLIST(sec, key, field)                                                              \
  Key {                                                                                        \
    sec, key,                                                                                  \
        [](ExperimentConfig& c, const std::string& v) { c.field = double_list(key, v); },      \
        [](const ExperimentConfig& c) { return join(c.field); }                                \
  }
#define CG_ILIST(sec, key, field)                                                              \
  Key {                                                                                        \
    sec, key, [](ExperimentConfig& c, const std::string& v) { c.field = int_list(key, v); },  \
        [](const ExperimentConfig& c) { return join(c.field); }                                \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      CG_INT("lattice", "d", lattice.dimension, int),
      CG_INT("lattice", "L", lattice.half_side, int),
      CG_INT("lattice", "L_obs", lattice.observation_radius, int),
      Key{"lattice", "weights",
          [](ExperimentConfig& c, const std::string& v) {
            const std::string t = lower(trim(v));
            if (t == "unit") c.lattice.weight_mode = WeightMode::unit;
            else if (t == "random") c.lattice.weight_mode = WeightMode::uniformly_elliptic_random;
            else throw ConfigError("key 'weights': expected unit or random");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.lattice.weight_mode == WeightMode::unit ? "unit" : "random");
          }},
      CG_DOUBLE("lattice", "weight_low", lattice.weight_low),
      CG_DOUBLE("lattice", "weight_high", lattice.weight_high),
      CG_INT("lattice", "weight_seed", lattice.weight_seed, std::uint64_t),

      CG_INT("run", "seed", seed, std::uint64_t),
      CG_INT("run", "n", n_samples, std::size_t),
      CG_INT("run", "workers", workers, int),
      CG_INT("run", "m", m, int),
      CG_INT("run", "pieces", pieces, int),
      Key{"run", "censoring",
          [](ExperimentConfig& c, const std::string& v) {
            const std::string t = lower(trim(v));
            if (t == "dirichlet") c.censoring = Censoring::dirichlet_boundary;
            else if (t == "window") c.censoring = Censoring::window;
            else throw ConfigError("key 'censoring': expected dirichlet or window");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.censoring == Censoring::window ? "window" : "dirichlet");
          }},
      CG_DOUBLE("run", "k_sigma", k_sigma),
      CG_DOUBLE("run", "truncation_margin", truncation_margin),
      CG_DOUBLE("run", "relative_tolerance", relative_tolerance),
      CG_DOUBLE("run", "tail_relative_tolerance", tail_relative_tolerance),
      CG_DOUBLE("run", "kappa_tolerance", kappa_tolerance),
      CG_DOUBLE("run", "onearm_tolerance", onearm_tolerance),
      CG_DOUBLE("run", "twopoint_exponent_lo", twopoint_exponent_lo),
      CG_DOUBLE("run", "twopoint_exponent_hi", twopoint_exponent_hi),
      CG_DOUBLE("run", "r2_min", r2_min),
      CG_DOUBLE("run", "volume_tail_lo", volume_tail_lo),
      CG_DOUBLE("run", "volume_tail_hi", volume_tail_hi),
      CG_DOUBLE("run", "interlacement_sigma", interlacement_sigma),
      CG_DOUBLE("run", "locuniq_threshold", locuniq_threshold),
      CG_DOUBLE("run", "locuniq_scale", locuniq_scale),
      CG_DOUBLE("run", "u", u),
      CG_DOUBLE("run", "h", h),
      CG_INT("run", "r_K", r_K, int),
      CG_INT("run", "r0", r0, int),
      CG_DOUBLE("run", "lambda_factor", lambda_factor),
      CG_ILIST("run", "green_sweep", green_sweep),

      CG_DLIST("grids", "a_grid", a_grid),
      CG_ILIST("grids", "r_grid", r_grid),
      CG_DLIST("grids", "u_grid", u_grid),
      CG_DLIST("grids", "b_grid", b_grid),
      CG_ILIST("grids", "R_grid", R_grid),
      CG_ILIST("grids", "m_grid", m_grid),
      CG_ILIST("grids", "x_grid", x_grid),
      CG_DLIST("grids", "N_grid", N_grid),
      CG_DLIST("grids", "t_bins", t_bins),
  };
  return table;
}

#undef CG_DOUBLE
#undef CG_INT
#undef CG_DLIST
#undef CG_ILIST

const Key* find_key(const std::string& section, const std::string& name) {
  for (const Key& k : keys())
    if (name == k.name && (section.empty() || section == k.section)) return &k;
  return nullptr;
}

}  // namespace

std::vector<double> expand_range(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto c1 = item.find(':');
    if (c1 == std::string::npos) {
      out.push_back(to_double("grid", item));
      continue;
    }
    const auto c2 = item.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ConfigError("range must be start:step:stop");
    const double start = to_double("grid", item.substr(0, c1));
    const double step = to_double("grid", item.substr(c1 + 1, c2 - c1 - 1));
    const double stop = to_double("grid", item.substr(c2 + 1));
    if (!(step != 0) || (stop - start) / step < 0 || !std::isfinite(stop))
      throw ConfigError("empty or unbounded range '" + item + "'");
    const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 100000) throw ConfigError("range '" + item + "' too long");
    for (long long k = 0; k < count; ++k) {
      // Snap to 12 decimals so 0.1 steps print as written.
      const double v = start + static_cast<double>(k) * step;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  }
  return out;
}

Overrides parse_override_list(const std::vector<std::string>& items) {
  Overrides out;
  for (const std::string& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    out.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return out;
}

Overrides environment_overrides(const std::map<std::string, std::string>& env) {
  static const std::string prefix = "CABLEGFF_";
  Overrides out;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string want = lower(name.substr(prefix.size()));
    const Key* hit = nullptr;
    for (const Key& k : keys())
      if (lower(k.name) == want && (!hit || std::string(k.name) == name.substr(prefix.size())))
        hit = &k;
    if (!hit) throw ConfigError("unknown key in environment variable " + name);
    out.emplace_back(hit->name, value);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const Overrides& overrides) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "lattice" && section != "run" && section != "grids")
        throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const Key* k = find_key(section, key);
    if (!k) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    k->set(cfg, line.substr(eq + 1));
    seen.insert(k->name);
  }
  for (const auto& [raw, value] : overrides) {
    std::string sec, name = raw;
    if (const auto dot = raw.find('.'); dot != std::string::npos)
      sec = raw.substr(0, dot), name = raw.substr(dot + 1);
    const Key* k = find_key(sec, name);
    if (!k) throw ConfigError("unknown key '" + raw + "'");
    k->set(cfg, value);
    seen.insert(k->name);
  }
  for (const char* required : {"d", "L", "seed"})
    if (!seen.count(required)) throw ConfigError(std::string("missing mandatory key '") + required + "'");
  if (!seen.count("L_obs"))
    cfg.lattice.observation_radius =
        static_cast<int>(std::lround(2.0 * cfg.lattice.half_side / 3.0));
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  const LatticeSpec& l = c.lattice;
  if (l.dimension < 3 || l.dimension > 6) fail("d must be in 3..6 (transient lattices)");
  if (l.half_side < 2) fail("L must be >= 2");
  if (l.observation_radius < 1 || l.observation_radius >= l.half_side)
    fail("L_obs must be in 1..L-1");
  if (l.weight_mode == WeightMode::uniformly_elliptic_random &&
      !(l.weight_low > 0 && l.weight_low <= l.weight_high))
    fail("random weights need 0 < weight_low <= weight_high");
  if (c.n_samples < 1) fail("n must be >= 1");
  if (c.workers < 1) fail("workers must be >= 1");
  if (c.pieces < 1 || c.pieces > 32) fail("pieces must be in 1..32");
  if (c.m < 1 || c.pieces % c.m != 0) fail("m must divide pieces");
  for (int m : c.m_grid)
    if (m < 1 || c.pieces % m != 0) fail("m_grid entries must divide pieces");
  if (!(c.k_sigma > 0) || c.truncation_margin < 0) fail("need k_sigma > 0, truncation_margin >= 0");
  if (!(c.h > 0)) fail("h must be positive");
  const int obs = l.observation_radius;
  for (int r : c.r_grid)
    if (r < 1 || r > obs) fail("r_grid value " + std::to_string(r) + " outside 1..L_obs");
  for (int x : c.x_grid)
    if (x < 1 || 2 * x > obs) fail("x_grid value " + std::to_string(x) + " outside 1..L_obs/2");
  // r_K against L_obs is checked by the experiments that use K.
  if (c.r_K < 1) fail("r_K must be >= 1");
  if (c.r0 < 1 || c.r0 > c.r_K) fail("r0 outside 1..r_K");
  if (!(c.lambda_factor >= 1)) fail("lambda_factor must be >= 1");
  for (int R : c.R_grid)
    if (R < 1 || std::floor(c.lambda_factor * R) > obs)
      fail("R_grid value " + std::to_string(R) + ": lambda*R exceeds L_obs");
  for (double u : c.u_grid)
    if (!(u > 0)) fail("u_grid values must be positive");
  for (double N : c.N_grid)
    if (!(N > 0)) fail("N_grid values must be positive");
  for (std::size_t i = 1; i < c.t_bins.size(); ++i)
    if (!(c.t_bins[i] > c.t_bins[i - 1])) fail("t_bins must increase");
  if (c.t_bins.size() == 1) fail("t_bins needs at least two edges");
  for (int L : c.green_sweep)
    if (L < 2) fail("green_sweep sizes must be >= 2");
}

std::string echo_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const Key& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const Key& k : keys()) v.push_back(k.name);
    return v;
  }();
  return names;
}

}  // namespace cablegff
