#include "secured/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace secured {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(int line, const std::string& v) {
  std::uint64_t out = 0;
  const bool hex = v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X');
  const char* b = v.data() + (hex ? 2 : 0);
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out, hex ? 16 : 10);
  if (ec != std::errc() || p != e || b == e) throw ConfigError(line, "expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(int line, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + v + "'");
  }
}

bool parse_bool(int line, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(line, "expected true or false, got '" + v + "'");
}

}  // namespace

ConfigError::ConfigError(int l, const std::string& what)
    : std::runtime_error("config line " + std::to_string(l) + ": " + what), line(l) {}

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  bool versioned = false;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (std::filesystem::path(base_dir) / path).string();
  };
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (!versioned) {
      if (s != "secured-config 1") throw ConfigError(line, "first line must be 'secured-config 1'");
      versioned = true;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    SystemConfig& sys = cfg.system;
    if (key == "mode") {
      auto m = mode_from_name(val);
      if (!m) throw ConfigError(line, "unknown mode '" + val + "'");
      sys.mode = *m;
    } else if (key == "app1" || key == "app2") {
      cfg.apps[key == "app1" ? 0 : 1] = resolve(val);
    } else if (key == "interrupt") {
      std::istringstream f(val);
      std::string c, k, v;
      if (!(f >> c >> k >> v)) throw ConfigError(line, "interrupt = CYCLE CORE VECTOR");
      const auto core = parse_uint(line, k);
      if (core < 1 || core > 2) throw ConfigError(line, "core must be 1 or 2");
      sys.interrupts.push_back({parse_uint(line, c), static_cast<unsigned>(core - 1), static_cast<Addr>(parse_uint(line, v))});
    } else if (key == "alpha") {
      sys.leakage.alpha = parse_double(line, val);
    } else if (key == "beta") {
      sys.leakage.beta = parse_double(line, val);
    } else if (key == "gamma") {
      sys.leakage.gamma = parse_double(line, val);
    } else if (key == "sigma") {
      sys.leakage.sigma = parse_double(line, val);
    } else if (key == "seed") {
      sys.leakage.seed = parse_uint(line, val);
    } else if (key == "leakage") {
      if (val != "hw" && val != "hd") throw ConfigError(line, "leakage must be hw or hd");
      sys.leakage.hamming_distance = val == "hd";
    } else if (key == "max_cycles") {
      sys.max_cycles = parse_uint(line, val);
    } else if (key == "trace") {
      cfg.trace_path = val.empty() ? std::string() : resolve(val);
      sys.record_trace = !val.empty();
    } else if (key == "events") {
      sys.keep_events = parse_bool(line, val);
    } else {
      throw ConfigError(line, "unknown key '" + key + "'");
    }
  }
  if (!versioned) throw ConfigError(line, "empty configuration");
  try {
    cfg.system.leakage.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(line, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  const SystemConfig& s = cfg.system;
  os << "secured-config 1\n";
  os << "mode = " << mode_name(s.mode) << "\n";
  for (unsigned k = 0; k < 2; ++k)
    if (cfg.apps[k]) os << "app" << k + 1 << " = " << *cfg.apps[k] << "\n";
  for (const auto& i : s.interrupts) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "interrupt = %llu %u 0x%x\n", static_cast<unsigned long long>(i.cycle), i.core + 1, i.vector);
    os << buf;
  }
  os << "alpha = " << s.leakage.alpha << "\nbeta = " << s.leakage.beta << "\ngamma = " << s.leakage.gamma
     << "\nsigma = " << s.leakage.sigma << "\nseed = " << s.leakage.seed
     << "\nleakage = " << (s.leakage.hamming_distance ? "hd" : "hw") << "\nmax_cycles = " << s.max_cycles << "\n";
  if (!cfg.trace_path.empty()) os << "trace = " << cfg.trace_path << "\n";
  return os.str();
}

}  // namespace secured
