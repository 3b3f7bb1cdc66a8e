#pragma once
// Experiment configuration: an INI-style `key = value` format with
// [problem], [optimizer], and [run] sections, hash comments, strict
// typed parsing (unknown keys are hard errors), and a canonical
// serializer whose output parses back to the identical configuration.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "newton_schulz.hpp"
#include "optim.hpp"

namespace condaopt {

// Configuration problems are their own category so the CLI can map them
// to a dedicated exit status.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ProblemKind { quadratic, mlp };
enum class LrSchedule { constant, cosine_with_warmup };

inline const char* problem_kind_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::mlp: return "mlp";
  }
  throw std::logic_error("unreachable problem kind");
}

inline const char* lr_schedule_name(LrSchedule schedule) {
  switch (schedule) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::cosine_with_warmup: return "cosine_with_warmup";
  }
  throw std::logic_error("unreachable schedule kind");
}

// [problem] section: which synthetic task to build and its shape knobs.
// The quadratic uses rows/cols/kappa; the MLP uses the dim/batch/noise
// fields. All fields keep their defaults when a key is absent.
struct ProblemConfig {
  ProblemKind kind = ProblemKind::quadratic;
  std::size_t rows = 16;
  std::size_t cols = 16;
  double kappa = 10.0;
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t output_dim = 8;
  std::size_t batch = 64;
  double noise = 0.01;

  void validate() const {
    if (rows < 1 || cols < 1) throw ConfigError("problem: rows and cols must be at least 1");
    if (!(kappa >= 1.0)) throw ConfigError("problem: kappa must be at least 1");
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
      throw ConfigError("problem: mlp dimensions must be at least 1");
    }
    if (batch < 1) throw ConfigError("problem: batch must be at least 1");
    if (!(noise >= 0.0)) throw ConfigError("problem: noise must be nonnegative");
  }
};

// One [optimizer] section: the update rule, its hyperparameters, and an
// optional learning-rate grid for comparisons. An empty grid means
// "just the configured lr".
struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::adam;
  OptimizerConfig config;
  std::vector<double> lr_grid;

  std::vector<double> effective_grid() const {
    return lr_grid.empty() ? std::vector<double>{config.lr} : lr_grid;
  }

  void validate() const {
    try {
      config.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (double lr : lr_grid) {
      if (!(lr > 0.0)) throw ConfigError("optimizer: lr_grid entries must be positive");
    }
  }
};

// Full experiment description: problem, one or more optimizer blocks
// (train uses exactly one; compare runs them all), and the [run]
// section's loop controls.
struct ExperimentConfig {
  ProblemConfig problem;
  std::vector<OptimizerSpec> optimizers;
  std::int64_t steps = 100;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // 0 disables clipping
  LrSchedule lr_schedule = LrSchedule::constant;
  double warmup_fraction = 0.1;
  std::int64_t scalar_stride = 1;
  std::int64_t spectral_stride = 10;
  double threshold = 1e-3;  // steps-to-threshold target, relative to L0
  std::string output_dir = "out";

  // Structural validity only; operations that need optimizer blocks
  // (train: exactly one, compare: at least one) enforce that themselves.
  void validate() const {
    problem.validate();
    for (const OptimizerSpec& spec : optimizers) spec.validate();
    if (steps < 0) throw ConfigError("run: steps must be nonnegative");
    if (!(grad_clip >= 0.0)) throw ConfigError("run: grad_clip must be nonnegative");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
      throw ConfigError("run: warmup_fraction must be in [0, 1]");
    }
    if (scalar_stride < 1) throw ConfigError("run: scalar_stride must be at least 1");
    if (spectral_stride < 1) throw ConfigError("run: spectral_stride must be at least 1");
    if (!(threshold > 0.0)) throw ConfigError("run: threshold must be positive");
    if (output_dir.empty()) throw ConfigError("run: output_dir must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& text) {
  const char* ws = " \t\r";
  const std::size_t first = text.find_first_not_of(ws);
  if (first == std::string::npos) return "";
  const std::size_t last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
};

// Phase one: purely lexical. Splits the text into sections of raw
// key/value pairs, rejecting malformed lines but not yet interpreting
// any key.
inline std::vector<ConfigSection> lex_config(const std::string& text) {
  std::vector<ConfigSection> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header '" + line + "'");
      }
      ConfigSection section;
      section.name = trim(line.substr(1, line.size() - 2));
      section.line = line_no;
      if (section.name != "problem" && section.name != "optimizer" &&
          section.name != "run") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section '[" +
                          section.name + "]'");
      }
      sections.push_back(std::move(section));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    ConfigEntry entry;
    entry.key = trim(line.substr(0, eq));
    entry.value = trim(line.substr(eq + 1));
    entry.line = line_no;
    if (entry.key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (entry.value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty value for key '" +
                        entry.key + "'");
    }
    if (sections.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + entry.key +
                        "' appears before any section header");
    }
    sections.back().entries.push_back(std::move(entry));
  }
  return sections;
}

inline ConfigError entry_error(const ConfigEntry& entry, const std::string& detail) {
  return ConfigError("line " + std::to_string(entry.line) + ": key '" + entry.key +
                     "': " + detail);
}

inline double parse_double_value(const ConfigEntry& entry) {
  const std::string& text = entry.value;
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw entry_error(entry, "expected a real number, got '" + text + "'");
  }
  return value;
}

template <typename Int>
inline Int parse_int_value(const ConfigEntry& entry) {
  const std::string& text = entry.value;
  Int value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw entry_error(entry, "expected an integer, got '" + text + "'");
  }
  return value;
}

inline bool parse_bool_value(const ConfigEntry& entry) {
  if (entry.value == "true") return true;
  if (entry.value == "false") return false;
  throw entry_error(entry, "expected 'true' or 'false', got '" + entry.value + "'");
}

inline std::vector<double> parse_grid_value(const ConfigEntry& entry) {
  std::vector<double> grid;
  std::size_t start = 0;
  const std::string& text = entry.value;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string piece =
        trim(comma == std::string::npos ? text.substr(start)
                                        : text.substr(start, comma - start));
    if (piece.empty()) throw entry_error(entry, "empty entry in list");
    double value = 0.0;
    const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (res.ec != std::errc() || res.ptr != piece.data() + piece.size()) {
      throw entry_error(entry, "expected a real number, got '" + piece + "'");
    }
    grid.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return grid;
}

inline OptimizerKind parse_optimizer_kind(const ConfigEntry& entry) {
  const std::string& v = entry.value;
  if (v == "sgdm") return OptimizerKind::sgdm;
  if (v == "adam") return OptimizerKind::adam;
  if (v == "adamw") return OptimizerKind::adamw;
  if (v == "muon_ns") return OptimizerKind::muon_ns;
  if (v == "muon_svd") return OptimizerKind::muon_svd;
  if (v == "conda") return OptimizerKind::conda;
  throw entry_error(entry,
                    "expected one of sgdm, adam, adamw, muon_ns, muon_svd, conda");
}

inline void check_no_duplicate_keys(const ConfigSection& section) {
  std::set<std::string> seen;
  for (const ConfigEntry& entry : section.entries) {
    if (!seen.insert(entry.key).second) {
      throw ConfigError("line " + std::to_string(entry.line) + ": duplicate key '" +
                        entry.key + "' in [" + section.name + "]");
    }
  }
}

inline void apply_problem_entry(ProblemConfig& problem, const ConfigEntry& entry) {
  const std::string& k = entry.key;
  if (k == "kind") {
    if (entry.value == "quadratic") problem.kind = ProblemKind::quadratic;
    else if (entry.value == "mlp") problem.kind = ProblemKind::mlp;
    else throw entry_error(entry, "expected 'quadratic' or 'mlp'");
  } else if (k == "rows") problem.rows = parse_int_value<std::size_t>(entry);
  else if (k == "cols") problem.cols = parse_int_value<std::size_t>(entry);
  else if (k == "kappa") problem.kappa = parse_double_value(entry);
  else if (k == "input_dim") problem.input_dim = parse_int_value<std::size_t>(entry);
  else if (k == "hidden_dim") problem.hidden_dim = parse_int_value<std::size_t>(entry);
  else if (k == "output_dim") problem.output_dim = parse_int_value<std::size_t>(entry);
  else if (k == "batch") problem.batch = parse_int_value<std::size_t>(entry);
  else if (k == "noise") problem.noise = parse_double_value(entry);
  else throw ConfigError("unknown key '" + k + "' in [problem] (line " +
                         std::to_string(entry.line) + ")");
}

inline void apply_optimizer_entry(OptimizerSpec& spec, const ConfigEntry& entry) {
  const std::string& k = entry.key;
  OptimizerConfig& cfg = spec.config;
  if (k == "kind") spec.kind = parse_optimizer_kind(entry);
  else if (k == "lr") cfg.lr = parse_double_value(entry);
  else if (k == "beta1") cfg.beta1 = parse_double_value(entry);
  else if (k == "beta2") cfg.beta2 = parse_double_value(entry);
  else if (k == "mu") cfg.mu = parse_double_value(entry);
  else if (k == "eps") cfg.eps = parse_double_value(entry);
  else if (k == "weight_decay") cfg.weight_decay = parse_double_value(entry);
  else if (k == "update_freq") cfg.update_freq = parse_int_value<std::size_t>(entry);
  else if (k == "scale") cfg.scale = parse_double_value(entry);
  else if (k == "ns_steps") cfg.ns_steps = parse_int_value<std::size_t>(entry);
  else if (k == "ns_coeffs") {
    if (entry.value == "polar") cfg.ns_coeffs = kNewtonSchulzPolar;
    else if (entry.value == "fast") cfg.ns_coeffs = kNewtonSchulzFast;
    else throw entry_error(entry, "expected 'polar' or 'fast'");
  } else if (k == "bias_correction") cfg.bias_correction = parse_bool_value(entry);
  else if (k == "projection_ablation") cfg.projection_ablation = parse_bool_value(entry);
  else if (k == "lr_grid") spec.lr_grid = parse_grid_value(entry);
  else throw ConfigError("unknown key '" + k + "' in [optimizer] (line " +
                         std::to_string(entry.line) + ")");
}

inline void apply_run_entry(ExperimentConfig& cfg, const ConfigEntry& entry) {
  const std::string& k = entry.key;
  if (k == "steps") cfg.steps = parse_int_value<std::int64_t>(entry);
  else if (k == "seed") cfg.seed = parse_int_value<std::uint64_t>(entry);
  else if (k == "grad_clip") cfg.grad_clip = parse_double_value(entry);
  else if (k == "lr_schedule") {
    if (entry.value == "constant") cfg.lr_schedule = LrSchedule::constant;
    else if (entry.value == "cosine_with_warmup")
      cfg.lr_schedule = LrSchedule::cosine_with_warmup;
    else throw entry_error(entry, "expected 'constant' or 'cosine_with_warmup'");
  } else if (k == "warmup_fraction") cfg.warmup_fraction = parse_double_value(entry);
  else if (k == "scalar_stride") cfg.scalar_stride = parse_int_value<std::int64_t>(entry);
  else if (k == "spectral_stride")
    cfg.spectral_stride = parse_int_value<std::int64_t>(entry);
  else if (k == "threshold") cfg.threshold = parse_double_value(entry);
  else if (k == "output_dir") cfg.output_dir = entry.value;
  else throw ConfigError("unknown key '" + k + "' in [run] (line " +
                         std::to_string(entry.line) + ")");
}

}  // namespace detail

// Phase two on top of the lexer: interprets sections into a validated
// ExperimentConfig. Unknown sections, unknown keys, duplicate keys,
// repeated singleton sections, and untyped values are all hard errors.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  bool saw_problem = false;
  bool saw_run = false;
  for (const detail::ConfigSection& section : detail::lex_config(text)) {
    detail::check_no_duplicate_keys(section);
    if (section.name == "problem") {
      if (saw_problem) {
        throw ConfigError("line " + std::to_string(section.line) +
                          ": repeated [problem] section");
      }
      saw_problem = true;
      for (const auto& entry : section.entries) detail::apply_problem_entry(cfg.problem, entry);
    } else if (section.name == "optimizer") {
      OptimizerSpec spec;
      for (const auto& entry : section.entries) detail::apply_optimizer_entry(spec, entry);
      cfg.optimizers.push_back(std::move(spec));
    } else {
      if (saw_run) {
        throw ConfigError("line " + std::to_string(section.line) +
                          ": repeated [run] section");
      }
      saw_run = true;
      for (const auto& entry : section.entries) detail::apply_run_entry(cfg, entry);
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace detail {

inline std::string serialize_ns_coeffs(const NewtonSchulzCoeffs& coeffs) {
  const auto matches = [&](const NewtonSchulzCoeffs& preset) {
    return coeffs.a == preset.a && coeffs.b == preset.b && coeffs.c == preset.c;
  };
  if (matches(kNewtonSchulzPolar)) return "polar";
  if (matches(kNewtonSchulzFast)) return "fast";
  throw ConfigError("cannot serialize custom Newton-Schulz coefficients");
}

}  // namespace detail

// Canonical text form: fixed key order inside each section, numbers in
// shortest round-trip form, so parse(serialize(c)) reproduces c exactly
// and serialization is byte-deterministic.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[problem]\n";
  out << "batch = " << cfg.problem.batch << '\n';
  out << "cols = " << cfg.problem.cols << '\n';
  out << "hidden_dim = " << cfg.problem.hidden_dim << '\n';
  out << "input_dim = " << cfg.problem.input_dim << '\n';
  out << "kappa = " << format_double(cfg.problem.kappa) << '\n';
  out << "kind = " << problem_kind_name(cfg.problem.kind) << '\n';
  out << "noise = " << format_double(cfg.problem.noise) << '\n';
  out << "output_dim = " << cfg.problem.output_dim << '\n';
  out << "rows = " << cfg.problem.rows << '\n';
  for (const OptimizerSpec& spec : cfg.optimizers) {
    out << "\n[optimizer]\n";
    out << "beta1 = " << format_double(spec.config.beta1) << '\n';
    out << "beta2 = " << format_double(spec.config.beta2) << '\n';
    out << "bias_correction = " << (spec.config.bias_correction ? "true" : "false")
        << '\n';
    out << "eps = " << format_double(spec.config.eps) << '\n';
    out << "kind = " << optimizer_kind_name(spec.kind) << '\n';
    out << "lr = " << format_double(spec.config.lr) << '\n';
    if (!spec.lr_grid.empty()) {
      out << "lr_grid = ";
      for (std::size_t i = 0; i < spec.lr_grid.size(); ++i) {
        if (i > 0) out << ',';
        out << format_double(spec.lr_grid[i]);
      }
      out << '\n';
    }
    out << "mu = " << format_double(spec.config.mu) << '\n';
    out << "ns_coeffs = " << detail::serialize_ns_coeffs(spec.config.ns_coeffs) << '\n';
    out << "ns_steps = " << spec.config.ns_steps << '\n';
    out << "projection_ablation = "
        << (spec.config.projection_ablation ? "true" : "false") << '\n';
    out << "scale = " << format_double(spec.config.scale) << '\n';
    out << "update_freq = " << spec.config.update_freq << '\n';
    out << "weight_decay = " << format_double(spec.config.weight_decay) << '\n';
  }
  out << "\n[run]\n";
  out << "grad_clip = " << format_double(cfg.grad_clip) << '\n';
  out << "lr_schedule = " << lr_schedule_name(cfg.lr_schedule) << '\n';
  out << "output_dir = " << cfg.output_dir << '\n';
  out << "scalar_stride = " << cfg.scalar_stride << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "spectral_stride = " << cfg.spectral_stride << '\n';
  out << "steps = " << cfg.steps << '\n';
  out << "threshold = " << format_double(cfg.threshold) << '\n';
  out << "warmup_fraction = " << format_double(cfg.warmup_fraction) << '\n';
  return out.str();
}

}  // namespace condaopt
