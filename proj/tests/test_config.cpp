// Config parsing: sections, typed keys, strict error handling, and the
// canonical serializer round trip.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "condaopt/config.hpp"
#include "condaopt/newton_schulz.hpp"

using namespace condaopt;

namespace {

const char* kRichConfig = R"(# exercise every key
[problem]
kind = mlp
rows = 12          # quadratic keys may coexist with mlp ones
cols = 34
kappa = 250.5
input_dim = 9
hidden_dim = 17
output_dim = 4
batch = 33
noise = 0.125

[optimizer]
kind = conda
lr = 0.003
beta1 = 0.8
beta2 = 0.975
mu = 0.9
eps = 1e-9
weight_decay = 0.05
update_freq = 25
scale = 2.5
ns_steps = 7
ns_coeffs = fast
bias_correction = false
projection_ablation = true
lr_grid = 1e-3, 3e-3,0.01

[optimizer]
kind = muon_ns

[run]
steps = 321
seed = 9001
grad_clip = 1.5
lr_schedule = cosine_with_warmup
warmup_fraction = 0.25
scalar_stride = 3
spectral_stride = 7
threshold = 0.01
output_dir = scratch/run7
)";

void require_same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  REQUIRE(a.problem.kind == b.problem.kind);
  REQUIRE(a.problem.rows == b.problem.rows);
  REQUIRE(a.problem.cols == b.problem.cols);
  REQUIRE(a.problem.kappa == b.problem.kappa);
  REQUIRE(a.problem.input_dim == b.problem.input_dim);
  REQUIRE(a.problem.hidden_dim == b.problem.hidden_dim);
  REQUIRE(a.problem.output_dim == b.problem.output_dim);
  REQUIRE(a.problem.batch == b.problem.batch);
  REQUIRE(a.problem.noise == b.problem.noise);
  REQUIRE(a.optimizers.size() == b.optimizers.size());
  for (std::size_t i = 0; i < a.optimizers.size(); ++i) {
    const OptimizerSpec& x = a.optimizers[i];
    const OptimizerSpec& y = b.optimizers[i];
    REQUIRE(x.kind == y.kind);
    REQUIRE(x.config.lr == y.config.lr);
    REQUIRE(x.config.beta1 == y.config.beta1);
    REQUIRE(x.config.beta2 == y.config.beta2);
    REQUIRE(x.config.mu == y.config.mu);
    REQUIRE(x.config.eps == y.config.eps);
    REQUIRE(x.config.weight_decay == y.config.weight_decay);
    REQUIRE(x.config.update_freq == y.config.update_freq);
    REQUIRE(x.config.scale == y.config.scale);
    REQUIRE(x.config.ns_steps == y.config.ns_steps);
    REQUIRE(x.config.ns_coeffs.a == y.config.ns_coeffs.a);
    REQUIRE(x.config.ns_coeffs.b == y.config.ns_coeffs.b);
    REQUIRE(x.config.ns_coeffs.c == y.config.ns_coeffs.c);
    REQUIRE(x.config.bias_correction == y.config.bias_correction);
    REQUIRE(x.config.projection_ablation == y.config.projection_ablation);
    REQUIRE(x.lr_grid == y.lr_grid);
  }
  REQUIRE(a.steps == b.steps);
  REQUIRE(a.seed == b.seed);
  REQUIRE(a.grad_clip == b.grad_clip);
  REQUIRE(a.lr_schedule == b.lr_schedule);
  REQUIRE(a.warmup_fraction == b.warmup_fraction);
  REQUIRE(a.scalar_stride == b.scalar_stride);
  REQUIRE(a.spectral_stride == b.spectral_stride);
  REQUIRE(a.threshold == b.threshold);
  REQUIRE(a.output_dir == b.output_dir);
}

}  // namespace

TEST_CASE("rich config parses every key", "[config]") {
  const ExperimentConfig cfg = parse_config(kRichConfig);
  REQUIRE(cfg.problem.kind == ProblemKind::mlp);
  REQUIRE(cfg.problem.rows == 12);
  REQUIRE(cfg.problem.cols == 34);
  REQUIRE(cfg.problem.kappa == 250.5);
  REQUIRE(cfg.problem.input_dim == 9);
  REQUIRE(cfg.problem.hidden_dim == 17);
  REQUIRE(cfg.problem.output_dim == 4);
  REQUIRE(cfg.problem.batch == 33);
  REQUIRE(cfg.problem.noise == 0.125);

  REQUIRE(cfg.optimizers.size() == 2);
  const OptimizerSpec& conda = cfg.optimizers[0];
  REQUIRE(conda.kind == OptimizerKind::conda);
  REQUIRE(conda.config.lr == 0.003);
  REQUIRE(conda.config.beta1 == 0.8);
  REQUIRE(conda.config.beta2 == 0.975);
  REQUIRE(conda.config.mu == 0.9);
  REQUIRE(conda.config.eps == 1e-9);
  REQUIRE(conda.config.weight_decay == 0.05);
  REQUIRE(conda.config.update_freq == 25);
  REQUIRE(conda.config.scale == 2.5);
  REQUIRE(conda.config.ns_steps == 7);
  REQUIRE(conda.config.ns_coeffs.a == kNewtonSchulzFast.a);
  REQUIRE(conda.config.bias_correction == false);
  REQUIRE(conda.config.projection_ablation == true);
  REQUIRE(conda.lr_grid == std::vector<double>{1e-3, 3e-3, 0.01});

  const OptimizerSpec& muon = cfg.optimizers[1];
  REQUIRE(muon.kind == OptimizerKind::muon_ns);
  REQUIRE(muon.config.lr == 0.01);  // untouched default
  REQUIRE(muon.lr_grid.empty());
  REQUIRE(muon.effective_grid() == std::vector<double>{0.01});

  REQUIRE(cfg.steps == 321);
  REQUIRE(cfg.seed == 9001);
  REQUIRE(cfg.grad_clip == 1.5);
  REQUIRE(cfg.lr_schedule == LrSchedule::cosine_with_warmup);
  REQUIRE(cfg.warmup_fraction == 0.25);
  REQUIRE(cfg.scalar_stride == 3);
  REQUIRE(cfg.spectral_stride == 7);
  REQUIRE(cfg.threshold == 0.01);
  REQUIRE(cfg.output_dir == "scratch/run7");
}

TEST_CASE("empty and minimal configs fall back to defaults", "[config]") {
  const ExperimentConfig empty = parse_config("");
  REQUIRE(empty.problem.kind == ProblemKind::quadratic);
  REQUIRE(empty.optimizers.empty());
  REQUIRE(empty.steps == 100);
  REQUIRE(empty.seed == 0);
  REQUIRE(empty.lr_schedule == LrSchedule::constant);

  const ExperimentConfig minimal = parse_config("[optimizer]\nkind = adamw\n");
  REQUIRE(minimal.optimizers.size() == 1);
  REQUIRE(minimal.optimizers[0].kind == OptimizerKind::adamw);
  REQUIRE(minimal.optimizers[0].config.lr == 0.01);
}

TEST_CASE("comments and whitespace are ignored", "[config]") {
  const ExperimentConfig cfg = parse_config(
      "# leading comment\n"
      "\n"
      "  [run]   \n"
      "   steps=7#trailing comment\n"
      "\tseed =  5  \n"
      "# done\n");
  REQUIRE(cfg.steps == 7);
  REQUIRE(cfg.seed == 5);
}

TEST_CASE("unknown sections and keys are hard errors", "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("[training]\nsteps = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "unknown section '[training]'")));
  REQUIRE_THROWS_MATCHES(parse_config("[problem]\nsize = 4\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "unknown key 'size' in [problem]")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nlearning_rate = 0.1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "unknown key 'learning_rate' in [optimizer]")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nstride = 2\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "unknown key 'stride' in [run]")));
}

TEST_CASE("malformed lines are rejected with line numbers", "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nsteps\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "line 2: expected 'key = value'")));
  REQUIRE_THROWS_MATCHES(parse_config("steps = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "before any section header")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\n= 5\n"), ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("empty key")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nsteps =\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "empty value for key 'steps'")));
  REQUIRE_THROWS_MATCHES(parse_config("[run\nsteps = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "malformed section header '[run'")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nno equals sign\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected 'key = value'")));
  REQUIRE_THROWS_MATCHES(parse_config("[]\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "malformed section header")));
}

TEST_CASE("duplicate keys and repeated singleton sections are rejected",
          "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nsteps = 1\nsteps = 2\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "duplicate key 'steps' in [run]")));
  REQUIRE_THROWS_MATCHES(parse_config("[problem]\n[problem]\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "repeated [problem] section")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\n[run]\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "repeated [run] section")));
  // Multiple optimizer sections are the comparison mechanism, not an error.
  REQUIRE(parse_config("[optimizer]\nkind = adam\n[optimizer]\nkind = conda\n")
              .optimizers.size() == 2);
}

TEST_CASE("typed values parse strictly", "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nlr = abc\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected a real number")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nsteps = 1.5\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected an integer")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nsteps = 0x10\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected an integer")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nseed = -1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected an integer")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nbias_correction = yes\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected 'true' or 'false'")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nkind = sgd\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected one of sgdm, adam, adamw")));
  REQUIRE_THROWS_MATCHES(parse_config("[problem]\nkind = cnn\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected 'quadratic' or 'mlp'")));
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nlr_schedule = linear\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected 'constant' or 'cosine_with_warmup'")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nns_coeffs = quintic\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "expected 'polar' or 'fast'")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nlr_grid = 1e-3,,1e-2\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "empty entry in list")));
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nlr_grid = 1e-3,\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "empty entry in list")));
}

TEST_CASE("range validation rejects out-of-domain values", "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("[problem]\nkappa = 0.5\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "kappa must be at least 1")));
  REQUIRE_THROWS_AS(parse_config("[problem]\nrows = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[problem]\nnoise = -0.1\n"), ConfigError);
  REQUIRE_THROWS_MATCHES(parse_config("[run]\nwarmup_fraction = 1.5\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "warmup_fraction must be in [0, 1]")));
  REQUIRE_THROWS_AS(parse_config("[run]\nscalar_stride = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[run]\nspectral_stride = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[run]\nthreshold = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[run]\ngrad_clip = -1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[run]\nsteps = -5\n"), ConfigError);
  // Optimizer hyperparameter bounds surface as config errors too.
  REQUIRE_THROWS_MATCHES(parse_config("[optimizer]\nbeta1 = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "beta1 must be in [0, 1)")));
  REQUIRE_THROWS_AS(parse_config("[optimizer]\nlr = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[optimizer]\nlr_grid = 1e-3,-1e-3\n"), ConfigError);
}

TEST_CASE("serialize round-trips the parsed config exactly", "[config]") {
  const ExperimentConfig cfg = parse_config(kRichConfig);
  const std::string canonical = serialize_config(cfg);
  const ExperimentConfig reparsed = parse_config(canonical);
  require_same_config(cfg, reparsed);
  // Canonical form is a fixed point: serializing again is byte-identical.
  REQUIRE(serialize_config(reparsed) == canonical);
}

TEST_CASE("serialized defaults parse back to defaults", "[config]") {
  ExperimentConfig cfg;
  cfg.optimizers.emplace_back();
  const ExperimentConfig reparsed = parse_config(serialize_config(cfg));
  require_same_config(cfg, reparsed);
}

TEST_CASE("missing config file is a config error", "[config]") {
  REQUIRE_THROWS_MATCHES(
      load_config("/nonexistent/condaopt.cfg"), ConfigError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("cannot read config file")));
}
