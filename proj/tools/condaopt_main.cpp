// Command-line front end: train a single optimizer, sweep a comparison
// grid, run the equivalence-verification suite, or check analytic
// gradients against finite differences.
//
// Exit status: 0 on success, 1 on verification or runtime failure,
// 2 on configuration errors. All errors go to stderr as
// "error: <category>: <detail>".

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "condaopt/config.hpp"
#include "condaopt/diagnostics.hpp"
#include "condaopt/harness.hpp"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

condaopt::ExperimentConfig load_with_overrides(const CommonOptions& opts) {
  condaopt::ExperimentConfig cfg = condaopt::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  cfg.validate();
  return cfg;
}

void add_common_options(CLI::App& sub, CommonOptions& opts) {
  sub.add_option("--config", opts.config_path, "Path to the experiment config file")
      ->required();
  sub.add_option("--seed", opts.seed, "Override the seed from the config file");
  sub.add_option("--out", opts.out_dir, "Override the output directory");
}

void print_train_result(const condaopt::ExperimentConfig& cfg,
                        const condaopt::TrainResult& result) {
  std::cout << "optimizer: "
            << condaopt::optimizer_kind_name(cfg.optimizers[0].kind) << '\n'
            << "steps: " << cfg.steps << '\n'
            << "initial_loss: " << condaopt::format_double(result.initial_loss)
            << '\n'
            << "final_loss: " << condaopt::format_double(result.final_loss) << '\n'
            << "steps_to_threshold: " << result.steps_to_threshold << '\n'
            << "median_ln_cond: " << condaopt::format_double(result.median_ln_cond)
            << '\n'
            << "output_dir: " << cfg.output_dir << '\n';
}

int run_train(const CommonOptions& opts) {
  const condaopt::ExperimentConfig cfg = load_with_overrides(opts);
  const condaopt::TrainResult result = condaopt::run_experiment(cfg);
  print_train_result(cfg, result);
  return kExitSuccess;
}

int run_compare(const CommonOptions& opts) {
  const condaopt::ExperimentConfig cfg = load_with_overrides(opts);
  const std::vector<condaopt::SummaryRow> rows = condaopt::compare_optimizers(cfg);
  std::cout << "optimizer,best_lr,steps_to_threshold,final_loss,median_ln_cond\n";
  for (const condaopt::SummaryRow& row : rows) {
    std::cout << row.optimizer << ',' << condaopt::format_double(row.best_lr)
              << ',' << row.steps_to_threshold << ','
              << condaopt::format_double(row.final_loss) << ','
              << condaopt::format_double(row.median_ln_cond) << '\n';
  }
  std::cout << "wrote " << cfg.output_dir << "/summary.csv\n";
  return kExitSuccess;
}

int run_verify(std::uint64_t seed, int trials, bool rank_deficient) {
  const condaopt::VerifyReport report =
      condaopt::verify_lemmas(seed, trials, rank_deficient);
  for (const condaopt::VerifyCheck& check : report.checks) {
    std::cout << (check.passed ? "PASS" : "FAIL") << "  " << check.name
              << "  max deviation " << condaopt::format_double(check.max_deviation)
              << " (tolerance " << condaopt::format_double(check.tolerance) << ")";
    if (!check.note.empty()) std::cout << "  [" << check.note << ']';
    std::cout << '\n';
  }
  if (!report.all_passed) {
    std::cerr << "error: verification: at least one equivalence check exceeded "
                 "its tolerance\n";
    return kExitFailure;
  }
  std::cout << "all " << report.checks.size() << " checks passed\n";
  return kExitSuccess;
}

int run_grad_check_cmd(const CommonOptions& opts, double h) {
  const condaopt::ExperimentConfig cfg = load_with_overrides(opts);
  const double max_rel_error = condaopt::run_grad_check(cfg, h);
  const double bound = cfg.problem.kind == condaopt::ProblemKind::quadratic
                           ? 1e-7
                           : 1e-5;
  std::cout << "problem: " << condaopt::problem_kind_name(cfg.problem.kind) << '\n'
            << "h: " << condaopt::format_double(h) << '\n'
            << "max_rel_error: " << condaopt::format_double(max_rel_error) << '\n'
            << "bound: " << condaopt::format_double(bound) << '\n';
  if (!(max_rel_error <= bound)) {
    std::cerr << "error: verification: gradient check exceeded its bound\n";
    return kExitFailure;
  }
  std::cout << "PASS\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Column-normalized and orthogonalized optimizers: training, "
               "comparison grids, equivalence verification, gradient checks"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "Run one optimizer on one problem");
  add_common_options(*train, train_opts);

  CommonOptions compare_opts;
  CLI::App* compare = app.add_subcommand(
      "compare", "Sweep learning-rate grids for several optimizers");
  add_common_options(*compare, compare_opts);

  std::uint64_t verify_seed = 0;
  int verify_trials = 50;
  bool verify_rank_deficient = false;
  CLI::App* verify = app.add_subcommand(
      "verify-lemmas", "Check the update-form equivalences numerically");
  verify->add_option("--seed", verify_seed, "Seed for the random trial matrices");
  verify->add_option("--trials", verify_trials, "Random instances per check")
      ->check(CLI::PositiveNumber);
  verify->add_flag("--rank-deficient", verify_rank_deficient,
                   "Also confirm the rank-deficient rejection path");

  CommonOptions grad_opts;
  double grad_h = 1e-6;
  CLI::App* grad = app.add_subcommand(
      "grad-check", "Compare analytic gradients against central differences");
  // The step-size flag is spelled --h, so this subcommand's help flag
  // keeps only its long form.
  grad->set_help_flag("--help", "Print this help message and exit");
  add_common_options(*grad, grad_opts);
  grad->add_option("--h", grad_h, "Finite-difference step size")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (*train) return run_train(train_opts);
    if (*compare) return run_compare(compare_opts);
    if (*verify) return run_verify(verify_seed, verify_trials, verify_rank_deficient);
    if (*grad) return run_grad_check_cmd(grad_opts, grad_h);
    std::cerr << "error: config: no subcommand selected\n";
    return kExitConfigError;
  } catch (const condaopt::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << '\n';
    return kExitFailure;
  }
}
