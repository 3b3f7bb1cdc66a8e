#pragma once
// Experiment runner: deterministic training loops with gradient
// clipping and learning-rate schedules, optimizer comparison over
// learning-rate grids, the equivalence-verification suite, and the
// finite-difference gradient check entry point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "diagnostics.hpp"
#include "matrix.hpp"
#include "models.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace condaopt {

// Effective learning rate at 1-based `step` of `total_steps`. Constant
// schedule returns the base rate. Cosine-with-warmup ramps linearly
// over ceil(warmup_fraction * total_steps) steps, then follows a cosine
// from the base rate down to 10% of it at the final step.
inline double scheduled_lr(LrSchedule schedule, double base_lr, double warmup_fraction,
                           std::int64_t step, std::int64_t total_steps) {
  if (schedule == LrSchedule::constant) return base_lr;
  const auto warmup = static_cast<std::int64_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  if (warmup > 0 && step <= warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return base_lr;
  const double floor_lr = 0.1 * base_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return floor_lr + (base_lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// Median of a value list (mean of the two middles for even counts);
// NaN for an empty list.
inline double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Everything one training run produces. median_ln_cond is the median
// of the ln_cond column over matrix-parameter rows of scalars.csv;
// steps_to_threshold is the number of optimizer steps after which the
// loss first reached threshold * initial loss, or -1 if it never did.
struct TrainResult {
  RunLog log;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::int64_t steps_to_threshold = -1;
  double median_ln_cond = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void fill_config_meta(RunLog& log, const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  log.set_meta("problem.kind", problem_kind_name(p.kind));
  log.set_meta("problem.rows", std::to_string(p.rows));
  log.set_meta("problem.cols", std::to_string(p.cols));
  log.set_meta("problem.kappa", format_double(p.kappa));
  log.set_meta("problem.input_dim", std::to_string(p.input_dim));
  log.set_meta("problem.hidden_dim", std::to_string(p.hidden_dim));
  log.set_meta("problem.output_dim", std::to_string(p.output_dim));
  log.set_meta("problem.batch", std::to_string(p.batch));
  log.set_meta("problem.noise", format_double(p.noise));
  const OptimizerSpec& spec = cfg.optimizers.front();
  log.set_meta("optimizer.kind", optimizer_kind_name(spec.kind));
  log.set_meta("optimizer.lr", format_double(spec.config.lr));
  log.set_meta("optimizer.beta1", format_double(spec.config.beta1));
  log.set_meta("optimizer.beta2", format_double(spec.config.beta2));
  log.set_meta("optimizer.mu", format_double(spec.config.mu));
  log.set_meta("optimizer.eps", format_double(spec.config.eps));
  log.set_meta("optimizer.weight_decay", format_double(spec.config.weight_decay));
  log.set_meta("optimizer.update_freq", std::to_string(spec.config.update_freq));
  log.set_meta("optimizer.scale", format_double(spec.config.scale));
  log.set_meta("optimizer.ns_steps", std::to_string(spec.config.ns_steps));
  log.set_meta("optimizer.ns_coeffs", serialize_ns_coeffs(spec.config.ns_coeffs));
  log.set_meta("optimizer.bias_correction",
               spec.config.bias_correction ? "true" : "false");
  log.set_meta("optimizer.projection_ablation",
               spec.config.projection_ablation ? "true" : "false");
  log.set_meta("run.steps", std::to_string(cfg.steps));
  log.set_meta("run.seed", std::to_string(cfg.seed));
  log.set_meta("run.rng", "xoshiro256++ (seeded via splitmix64)");
  log.set_meta("run.grad_clip", format_double(cfg.grad_clip));
  log.set_meta("run.lr_schedule", lr_schedule_name(cfg.lr_schedule));
  log.set_meta("run.warmup_fraction", format_double(cfg.warmup_fraction));
  log.set_meta("run.scalar_stride", std::to_string(cfg.scalar_stride));
  log.set_meta("run.spectral_stride", std::to_string(cfg.spectral_stride));
  log.set_meta("run.threshold", format_double(cfg.threshold));
  log.set_meta("run.output_dir", cfg.output_dir);
}

// The training loop shared by both problem families. 2D parameters are
// stepped by the configured optimizer, 1D parameters always by AdamW
// with the same hyperparameters. Scalar rows are emitted at steps 1,
// multiples of scalar_stride, and the last step; spectral records for
// matrix parameters at multiples of spectral_stride and the last step.
template <typename Problem>
TrainResult train_loop(Problem& problem, const ExperimentConfig& cfg) {
  const OptimizerSpec& spec = cfg.optimizers.front();
  std::vector<ParamRef> params = problem.params();

  TrainResult result;
  fill_config_meta(result.log, cfg);
  std::vector<ParamSlot> slots;
  slots.reserve(params.size());
  for (const ParamRef& param : params) {
    const OptimizerKind kind = param.is_matrix ? spec.kind : OptimizerKind::adamw;
    slots.push_back(ParamSlot::make(kind, param.value->rows(), param.value->cols(),
                                    spec.config, param.is_matrix));
    result.log.set_meta("param." + param.name + ".optimizer", optimizer_kind_name(kind));
  }

  result.initial_loss = problem.loss();
  const double target = cfg.threshold * result.initial_loss;
  std::vector<double> matrix_ln_conds;
  std::vector<double> grad_norms(params.size(), 0.0);

  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    auto [loss, grads] = problem.loss_and_gradients();
    if (!std::isfinite(loss)) {
      throw std::runtime_error("step " + std::to_string(t) + ": non-finite loss");
    }
    if (result.steps_to_threshold < 0 && loss <= target) {
      result.steps_to_threshold = t - 1;
    }

    double grad_norm_sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      grad_norms[i] = frobenius_norm(grads[i]);
      grad_norm_sq += grad_norms[i] * grad_norms[i];
    }
    if (cfg.grad_clip > 0.0) {
      const double global_norm = std::sqrt(grad_norm_sq);
      if (global_norm > cfg.grad_clip) {
        const double shrink = cfg.grad_clip / global_norm;
        for (Matrix2D& g : grads) g.scale(shrink);
      }
    }

    OptimizerConfig step_cfg = spec.config;
    step_cfg.lr = scheduled_lr(cfg.lr_schedule, spec.config.lr, cfg.warmup_fraction, t,
                               cfg.steps);

    const bool scalar_row =
        t == 1 || t == cfg.steps || t % cfg.scalar_stride == 0;
    const bool spectral_row = t == cfg.steps || t % cfg.spectral_stride == 0;

    for (std::size_t i = 0; i < params.size(); ++i) {
      StepResult stepped = [&] {
        try {
          return step_param(*params[i].value, grads[i], slots[i], step_cfg);
        } catch (const std::exception& e) {
          throw std::runtime_error("step " + std::to_string(t) + ", param '" +
                                   params[i].name + "': " + e.what());
        }
      }();
      *params[i].value = std::move(stepped.first);
      const Matrix2D& direction = stepped.second.update_matrix;

      if (!scalar_row && !(spectral_row && params[i].is_matrix)) continue;
      double ln_cond = 0.0;
      if (spectral_row && params[i].is_matrix) {
        SpectralRecord rec = record_spectrum(t, params[i].name, direction);
        ln_cond = rec.ln_cond;
        result.log.add_spectrum(std::move(rec));
      } else {
        ln_cond = std::log(condition_number(direction));
      }
      if (scalar_row) {
        ScalarRow row;
        row.step = t;
        row.param_id = params[i].name;
        row.loss = loss;
        row.grad_norm = grad_norms[i];
        row.update_rms =
            frobenius_norm(direction) / std::sqrt(static_cast<double>(direction.size()));
        row.ln_cond = ln_cond;
        result.log.add_scalars(row);
        if (params[i].is_matrix) matrix_ln_conds.push_back(ln_cond);
      }
    }
  }

  result.final_loss = problem.loss();
  if (result.steps_to_threshold < 0 && result.final_loss <= target) {
    result.steps_to_threshold = cfg.steps;
  }
  result.median_ln_cond = median(std::move(matrix_ln_conds));
  write_csv(result.log, cfg.output_dir);
  return result;
}

}  // namespace detail

// Runs one training experiment end to end and writes scalars.csv,
// spectra.csv, and run.meta into cfg.output_dir. Needs exactly one
// [optimizer] section; vector parameters are always routed to AdamW.
inline TrainResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.optimizers.size() != 1) {
    throw ConfigError("train needs exactly one [optimizer] section, got " +
                      std::to_string(cfg.optimizers.size()));
  }
  switch (cfg.problem.kind) {
    case ProblemKind::quadratic: {
      QuadraticProblem problem = quadratic_with_condition(
          cfg.problem.rows, cfg.problem.cols, cfg.problem.kappa, cfg.seed);
      return detail::train_loop(problem, cfg);
    }
    case ProblemKind::mlp: {
      MlpProblem problem(cfg.problem.input_dim, cfg.problem.hidden_dim,
                         cfg.problem.output_dim, cfg.problem.batch, cfg.problem.noise,
                         cfg.seed);
      return detail::train_loop(problem, cfg);
    }
  }
  throw std::logic_error("unreachable problem kind");
}

// One line of summary.csv: the best-of-grid run for one optimizer.
struct SummaryRow {
  std::string optimizer;
  double best_lr = 0.0;
  std::int64_t steps_to_threshold = -1;
  double final_loss = 0.0;
  double median_ln_cond = std::numeric_limits<double>::quiet_NaN();
};

inline void write_summary_csv(const std::vector<SummaryRow>& rows,
                              const std::filesystem::path& path) {
  std::ofstream out = detail::open_output(path);
  out << "optimizer,best_lr,steps_to_threshold,final_loss,median_ln_cond\n";
  for (const SummaryRow& row : rows) {
    out << row.optimizer << ',' << format_double(row.best_lr) << ','
        << row.steps_to_threshold << ',' << format_double(row.final_loss) << ','
        << format_double(row.median_ln_cond) << '\n';
  }
  detail::finish_output(out, path);
}

// Runs every [optimizer] section over its learning-rate grid on the
// shared problem and seed. Each cell writes its artifacts under
// <output_dir>/<optimizer>/lr_<value>/; the best run per optimizer
// (lowest final loss, earliest grid entry on ties) lands in
// <output_dir>/summary.csv.
inline std::vector<SummaryRow> compare_optimizers(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.optimizers.empty()) {
    throw ConfigError("compare needs at least one [optimizer] section");
  }
  std::set<std::string> seen;
  for (const OptimizerSpec& spec : cfg.optimizers) {
    if (!seen.insert(optimizer_kind_name(spec.kind)).second) {
      throw ConfigError(std::string("duplicate [optimizer] block for '") +
                        optimizer_kind_name(spec.kind) + "'");
    }
  }

  std::vector<SummaryRow> rows;
  for (const OptimizerSpec& spec : cfg.optimizers) {
    SummaryRow best_row;
    bool have_best = false;
    for (double lr : spec.effective_grid()) {
      ExperimentConfig cell = cfg;
      cell.optimizers = {spec};
      cell.optimizers.front().config.lr = lr;
      cell.optimizers.front().lr_grid.clear();
      cell.output_dir = (std::filesystem::path(cfg.output_dir) /
                         optimizer_kind_name(spec.kind) / ("lr_" + format_double(lr)))
                            .string();
      const TrainResult result = run_experiment(cell);
      if (!have_best || result.final_loss < best_row.final_loss) {
        have_best = true;
        best_row.optimizer = optimizer_kind_name(spec.kind);
        best_row.best_lr = lr;
        best_row.steps_to_threshold = result.steps_to_threshold;
        best_row.final_loss = result.final_loss;
        best_row.median_ln_cond = result.median_ln_cond;
      }
    }
    rows.push_back(std::move(best_row));
  }
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  write_summary_csv(rows, std::filesystem::path(cfg.output_dir) / "summary.csv");
  return rows;
}

// One equivalence check of the verification suite.
struct VerifyCheck {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 1e-10;
  bool passed = false;
  std::string note;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed = true;
};

// Numerically verifies the two equivalences the optimizer build relies
// on, over seeded random matrices:
//   1. the SVD-reformulated momentum orthogonalization equals the polar
//      factor (both orientations, plus left-right agreement on squares);
//   2. the column-wise single-column forms of the muon and conda
//      directions equal their matrix-form implementations.
// With include_rank_deficient, additionally confirms that a rank-
// deficient momentum is rejected with the documented error.
inline VerifyReport verify_lemmas(std::uint64_t seed, int trials,
                                  bool include_rank_deficient = false) {
  if (trials < 1) throw std::invalid_argument("verification needs trials >= 1");
  VerifyReport report;
  Rng rng(seed);
  const auto add = [&report](VerifyCheck check) {
    check.passed = check.max_deviation <= check.tolerance && check.note.empty();
    report.all_passed = report.all_passed && check.passed;
    report.checks.push_back(std::move(check));
  };
  const auto add_outcome = [&report](VerifyCheck check, bool passed) {
    check.passed = passed;
    report.all_passed = report.all_passed && passed;
    report.checks.push_back(std::move(check));
  };

  const std::pair<std::size_t, std::size_t> shapes[] = {{4, 6}, {6, 4}, {5, 5}};
  for (const auto& [rows, cols] : shapes) {
    VerifyCheck check;
    check.name = "svd-form direction vs polar factor, " + std::to_string(rows) + "x" +
                 std::to_string(cols);
    for (int trial = 0; trial < trials; ++trial) {
      const Matrix2D m = random_gaussian(rows, cols, rng);
      check.max_deviation = std::max(
          check.max_deviation, max_abs_diff(muon_svd_direction(m), polar_orthogonal(m)));
    }
    add(std::move(check));
  }

  {
    VerifyCheck check;
    check.name = "square case: left form vs right form, 5x5";
    for (int trial = 0; trial < trials; ++trial) {
      const Matrix2D m = random_gaussian(5, 5, rng);
      check.max_deviation =
          std::max(check.max_deviation,
                   max_abs_diff(muon_svd_direction_left(m), muon_svd_direction_right(m)));
    }
    add(std::move(check));
  }

  {
    VerifyCheck check;
    check.name = "column-wise muon form vs matrix form, 4x6";
    for (int trial = 0; trial < trials; ++trial) {
      const Matrix2D m = random_gaussian(4, 6, rng);
      check.max_deviation =
          std::max(check.max_deviation,
                   max_abs_diff(muon_columnwise_direction(m), muon_svd_direction(m)));
    }
    add(std::move(check));
  }

  {
    VerifyCheck check;
    check.name = "column-wise conda form vs matrix form, 5x7";
    for (int trial = 0; trial < trials; ++trial) {
      const Matrix2D u = random_orthogonal(5, rng);
      const Matrix2D m = random_gaussian(5, 7, rng);
      Matrix2D n(5, 7);
      for (std::size_t i = 0; i < n.size(); ++i) n.data()[i] = rng.uniform(0.5, 2.0);
      Matrix2D projected = multiply_transpose_a(u, m);
      for (std::size_t i = 0; i < projected.size(); ++i) {
        projected.data()[i] /= std::sqrt(n.data()[i]);
      }
      const Matrix2D matrix_form = multiply(u, projected);
      check.max_deviation =
          std::max(check.max_deviation,
                   max_abs_diff(conda_columnwise_direction(m, n, u), matrix_form));
    }
    add(std::move(check));
  }

  if (include_rank_deficient) {
    VerifyCheck check;
    check.name = "rank-deficient momentum rejection, 4x6 rank 1";
    Matrix2D rank_one(4, 6);
    const Matrix2D a = random_gaussian(4, 1, rng);
    const Matrix2D b = random_gaussian(1, 6, rng);
    rank_one = multiply(a, b);
    bool rejected = false;
    try {
      (void)muon_svd_direction(rank_one);
      check.note = "no error raised for rank-deficient input";
    } catch (const std::domain_error& e) {
      check.note = std::string("rejected with: ") + e.what();
      rejected = std::string(e.what()) == "rank-deficient momentum";
      if (!rejected) check.note += " (unexpected message)";
    }
    add_outcome(std::move(check), rejected);
  }

  return report;
}

// Finite-difference gradient check on the configured problem; returns
// the maximum relative error between analytic and central-difference
// gradients over all parameter entries.
inline double run_grad_check(const ExperimentConfig& cfg, double h) {
  cfg.problem.validate();
  switch (cfg.problem.kind) {
    case ProblemKind::quadratic: {
      QuadraticProblem problem = quadratic_with_condition(
          cfg.problem.rows, cfg.problem.cols, cfg.problem.kappa, cfg.seed);
      return finite_diff_check(problem, h);
    }
    case ProblemKind::mlp: {
      MlpProblem problem(cfg.problem.input_dim, cfg.problem.hidden_dim,
                         cfg.problem.output_dim, cfg.problem.batch, cfg.problem.noise,
                         cfg.seed);
      return finite_diff_check(problem, h);
    }
  }
  throw std::logic_error("unreachable problem kind");
}

}  // namespace condaopt
