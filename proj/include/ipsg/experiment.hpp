#ifndef IPSG_EXPERIMENT_HPP
#define IPSG_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipsg/core.hpp"
#include "ipsg/diagnostics.hpp"
#include "ipsg/instance_io.hpp"
#include "ipsg/problems.hpp"

namespace ipsg {

/// Invalid or malformed experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  std::string kind = "phase_retrieval";
  std::size_t m = 2000;
  std::size_t d = 50;
  // sparse_blr
  std::size_t s = 8, t = 8, classes = 4, rank = 2;
  double lambda = 1e-3;
  double noise_std = 0.5;
  // quadratic
  Vector diag;
  Vector center;
  std::size_t samples = 1;

  std::optional<std::string> instance_file;
  std::uint64_t instance_seed = 7;
  Regularizer regularizer;
};

struct MoreauSpec {
  bool enabled = false;
  std::optional<double> rho;  // default: estimated for phase retrieval
  std::optional<double> rho_bar;
  std::int64_t inner_budget = 500;
  double inner_tol = 1e-12;
  std::int64_t k0 = 1;  // output index T is drawn from {k0..K}
};

struct ConditionSpec {
  std::optional<Regime> regime;
  std::optional<double> rho;
  std::optional<double> rho_bar;
  std::optional<double> tau;
};

struct ExperimentConfig {
  ProblemSpec problem;
  /// Template for every run; seed, mode, workers and beta are overridden by
  /// the sweeps, iterations by epochs when those are given.
  RunConfig base;
  std::optional<std::int64_t> epochs;
  std::vector<std::uint64_t> seeds{1};
  std::vector<RunMode> modes{RunMode::Sequential};
  std::vector<double> beta_sweep;  // empty: the schedule's beta
  std::vector<int> worker_sweep;   // empty: base.workers
  std::string output_dir = "ipsg_out";
  MoreauSpec moreau;
  ConditionSpec conditions;
};

/// Strict JSON parsing: unknown keys, wrong types and invalid enum names
/// raise ConfigError; malformed JSON reports line and column.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

/// The fully resolved configuration (every default filled in) as JSON.
std::string resolved_config_json(const ExperimentConfig& cfg);

/// Generates or loads the instance data described by the spec.
InstanceData make_instance(const ProblemSpec& spec);
std::unique_ptr<Problem> build_problem(const InstanceData& data,
                                       const ProblemSpec& spec);

/// Weak-convexity constant used when none is configured: the power
/// iteration estimate for phase retrieval, max(diag) for quadratics.
std::optional<double> default_rho(const Problem& problem);

struct RunSpec {
  std::string id;
  RunConfig cfg;
};

/// One RunSpec per (mode, workers, beta, seed).
std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg,
                                 std::size_t num_samples);

/// Condition report for one run; nullopt when no regime is configured.
std::optional<ConditionReport> run_conditions(const ExperimentConfig& cfg,
                                              const RunConfig& run,
                                              const Problem& problem);

struct RunOutcome {
  RunSpec spec;
  std::string status = "ok";  // ok, diverged, error
  std::optional<std::int64_t> failed_k;
  std::string error;
  std::optional<Trace> trace;
  double wall_ms = 0.0;
  std::optional<std::int64_t> output_T;
  std::optional<double> output_objective;
  std::optional<double> moreau_estimate;
  std::string conditions = "n/a";
};

RunOutcome execute_run(const ExperimentConfig& cfg, const Problem& problem,
                       const RunSpec& spec);

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunOutcome> runs;
  bool ok() const;
};

/// Runs the whole grid, writing <out>/traces/<run id>.csv,
/// <out>/summary.csv and <out>/run_header.json. The IPSG_OUTPUT_DIR
/// environment variable overrides cfg.output_dir. Progress goes to log
/// when it is non-null.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kTraceHeader =
    "k,epoch,objective,step_norm,observed_delay,wall_ms";

/// Header, one row per record (objective empty when not recorded), then a
/// "# delay_stats ..." trailer when delay stats are present.
void write_trace_csv(const Trace& trace, std::ostream& out);

struct ParsedTrace {
  std::vector<TraceRecord> records;
  std::optional<DelayStats> delays;
};
ParsedTrace read_trace_csv(std::istream& in);

void write_summary_csv(const std::vector<RunOutcome>& runs, std::ostream& out);

/// Real number with 17 significant digits.
std::string format_real(double v);

}  // namespace ipsg

#endif  // IPSG_EXPERIMENT_HPP
