#pragma once
// Training-time spectral diagnostics and their on-disk formats: per-step
// condition numbers and log-spectra of update matrices, fixed-edge
// histograms, and byte-deterministic CSV / metadata writers.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "spectral.hpp"

namespace condaopt {

// Spectral snapshot of one update matrix: natural-log condition number
// plus the base-10 logs of every singular value. Values at or below
// 1e-300 are clamped to -300 so the log stays finite for rank-deficient
// updates.
struct SpectralRecord {
  std::int64_t step = 0;
  std::string param_id;
  double ln_cond = 0.0;
  std::vector<double> log10_sigmas;
};

// One row of the per-step scalar series. The loss is a property of the
// step, repeated on each parameter's row; the remaining columns are
// per-parameter.
struct ScalarRow {
  std::int64_t step = 0;
  std::string param_id;
  double loss = 0.0;
  double grad_norm = 0.0;
  double update_rms = 0.0;
  double ln_cond = 0.0;
};

namespace detail {

inline void check_param_id(const std::string& param_id) {
  if (param_id.find(',') != std::string::npos ||
      param_id.find('\n') != std::string::npos) {
    throw std::invalid_argument(
        "param id must not contain commas or newlines");
  }
}

}  // namespace detail

// Accumulates everything one training run produces: a key/value config
// snapshot, the scalar series, and spectral records at their stride.
// Single-writer by design; concurrent runs each own a RunLog.
class RunLog {
 public:
  void set_meta(std::string key, std::string value) {
    metadata_[std::move(key)] = std::move(value);
  }

  void add_scalars(ScalarRow row) {
    detail::check_param_id(row.param_id);
    if (!scalars_.empty()) {
      const ScalarRow& last = scalars_.back();
      if (row.step < last.step) {
        throw std::logic_error("run log steps must be non-decreasing");
      }
      if (row.step == last.step && !(row.loss == last.loss)) {
        throw std::logic_error("run log has conflicting losses for one step");
      }
    }
    scalars_.push_back(std::move(row));
  }

  void add_spectrum(SpectralRecord rec) {
    detail::check_param_id(rec.param_id);
    if (!spectra_.empty() && rec.step < spectra_.back().step) {
      throw std::logic_error("run log steps must be non-decreasing");
    }
    spectra_.push_back(std::move(rec));
  }

  const std::map<std::string, std::string>& metadata() const {
    return metadata_;
  }
  const std::vector<ScalarRow>& scalars() const { return scalars_; }
  const std::vector<SpectralRecord>& spectra() const { return spectra_; }

 private:
  std::map<std::string, std::string> metadata_;
  std::vector<ScalarRow> scalars_;
  std::vector<SpectralRecord> spectra_;
};

// Spectral snapshot of an update matrix: runs one singular value
// decomposition and derives both the condition number and the clamped
// log10 spectrum from it.
inline SpectralRecord record_spectrum(std::int64_t step,
                                      const std::string& param_id,
                                      const Matrix2D& update,
                                      double rank_tol = 1e-12) {
  detail::check_param_id(param_id);
  const std::vector<double> sigma = singular_spectrum(update);
  SpectralRecord rec;
  rec.step = step;
  rec.param_id = param_id;
  rec.ln_cond = std::log(condition_number(sigma, rank_tol));
  rec.log10_sigmas.reserve(sigma.size());
  for (double s : sigma) {
    rec.log10_sigmas.push_back(s <= 1e-300 ? -300.0 : std::log10(s));
  }
  return rec;
}

// Fixed-edge histogram over [lo, hi) with the given bin width; the last
// bin absorbs hi itself. Out-of-range values are clamped into the end
// bins (below-range and NaN to the first, above-range to the last), so
// the counts always sum to the input length.
inline std::vector<std::int64_t> histogram(const std::vector<double>& values,
                                           double bin_width, double lo,
                                           double hi) {
  if (!(bin_width > 0.0)) {
    throw std::invalid_argument("histogram bin width must be positive");
  }
  if (!(hi > lo)) {
    throw std::invalid_argument("histogram range must have max greater than min");
  }
  // The small slack keeps an exactly divisible span from picking up a
  // spurious extra bin through floating-point rounding of the quotient.
  const double raw_bins = (hi - lo) / bin_width - 1e-9;
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(raw_bins)));
  std::vector<std::int64_t> counts(bins, 0);
  for (double v : values) {
    const double pos = (v - lo) / bin_width;
    std::size_t idx = 0;
    if (pos >= static_cast<double>(bins)) {
      idx = bins - 1;
    } else if (pos > 0.0) {
      idx = static_cast<std::size_t>(pos);
    }
    ++counts[idx];
  }
  return counts;
}

// Shortest decimal string that round-trips the exact double, so files
// built from these strings are byte-deterministic and lossless.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[32];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("double formatting buffer exhausted");
  }
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  // Binary mode: no platform newline translation, keeping emitted files
  // byte-identical everywhere.
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path.string());
  }
  return out;
}

inline void finish_output(std::ofstream& out,
                          const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw std::runtime_error("failed writing output file: " + path.string());
  }
}

}  // namespace detail

inline void write_scalars_csv(const RunLog& log,
                              const std::filesystem::path& path) {
  std::ofstream out = detail::open_output(path);
  out << "step,param_id,loss,grad_norm,update_rms,ln_cond\n";
  for (const ScalarRow& row : log.scalars()) {
    out << row.step << ',' << row.param_id << ',' << format_double(row.loss)
        << ',' << format_double(row.grad_norm) << ','
        << format_double(row.update_rms) << ',' << format_double(row.ln_cond)
        << '\n';
  }
  detail::finish_output(out, path);
}

inline void write_spectra_csv(const RunLog& log,
                              const std::filesystem::path& path) {
  std::ofstream out = detail::open_output(path);
  out << "step,param_id,idx,log10_sigma\n";
  for (const SpectralRecord& rec : log.spectra()) {
    for (std::size_t i = 0; i < rec.log10_sigmas.size(); ++i) {
      out << rec.step << ',' << rec.param_id << ',' << i << ','
          << format_double(rec.log10_sigmas[i]) << '\n';
    }
  }
  detail::finish_output(out, path);
}

// Flat `key = value` metadata snapshot; keys emitted in sorted order.
inline void write_run_meta(const RunLog& log,
                           const std::filesystem::path& path) {
  std::ofstream out = detail::open_output(path);
  for (const auto& [key, value] : log.metadata()) {
    out << key << " = " << value << '\n';
  }
  detail::finish_output(out, path);
}

// Writes the full artifact set for one run — scalars.csv, spectra.csv,
// and run.meta — into dir, creating it if needed.
inline void write_csv(const RunLog& log, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory: " +
                             dir.string() + ": " + ec.message());
  }
  write_scalars_csv(log, dir / "scalars.csv");
  write_spectra_csv(log, dir / "spectra.csv");
  write_run_meta(log, dir / "run.meta");
}

}  // namespace condaopt
