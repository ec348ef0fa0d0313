#ifndef IPSG_CORE_HPP
#define IPSG_CORE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipsg/linalg.hpp"

namespace ipsg {

/// Thrown when a FixedHorizon schedule is queried past its horizon.
class ScheduleExhausted : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A run produced a non-finite gradient or iterate at update k.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t k, const std::string& what)
      : std::runtime_error(what), k_(k) {}
  std::int64_t k() const { return k_; }

 private:
  std::int64_t k_;
};

// ---------------------------------------------------------------------------
// Iterate

/// x^(k) together with x^(k-1). At construction k = 1 and x_prev = x_curr.
struct Iterate {
  Vector x_curr;
  Vector x_prev;
  std::int64_t k = 1;

  Iterate() = default;
  explicit Iterate(Vector x0) : x_curr(x0), x_prev(std::move(x0)) {}

  std::size_t dim() const { return x_curr.size(); }
};

// ---------------------------------------------------------------------------
// Schedules

enum class ScheduleKind {
  FixedHorizon,       // alpha/sqrt(K), beta/K^(1/4)
  DiminishingSqrtK,   // alpha/sqrt(k), min(beta_cap, beta/k^(1/4))
  DiminishingShifted, // alpha/sqrt(a+k-1), min(beta_cap, beta/(a+k-1)^(1/4))
  ConstantPair,       // alpha, beta
  MomentumCoupled,    // base step rule, beta_k = (alpha_k/alpha_{k-1}) beta
};

std::string_view to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(std::string_view name);

struct Schedule {
  ScheduleKind kind = ScheduleKind::ConstantPair;
  double alpha = 1.0;
  double beta = 0.0;
  double beta_cap = 0.9;
  std::int64_t horizon = 0;  // K, FixedHorizon only
  std::int64_t shift = 1;    // a, DiminishingShifted only
  /// Evaluate the formulas at e_k + 1 instead of k.
  bool epoch_based = false;
  /// Step-size rule used by MomentumCoupled.
  ScheduleKind coupled_base = ScheduleKind::ConstantPair;

  /// Throws std::invalid_argument when the parameters are inconsistent.
  /// The heavy-ball baseline accepts beta = 1 (plain projected SGD).
  void validate(bool allow_unit_beta = false) const;
};

/// Step size alpha_k for formula index k >= 1.
double alpha_at(const Schedule& s, std::int64_t k);

/// Inertia weight beta_k for formula index k >= 1. Always in [0, 1).
double beta_at(const Schedule& s, std::int64_t k);

/// Epoch number of iteration k: floor((k-1) b / m).
std::int64_t epoch_of(std::int64_t k, std::int64_t b, std::int64_t m);

struct StepParams {
  double alpha;
  double beta;
};

/// (alpha_k, beta_k) at iteration k, resolving epoch-based indexing with
/// b samples per update over m samples. For MomentumCoupled the inertia is
/// the ratio of the per-iteration step sizes, so within an epoch it is beta.
StepParams step_params(const Schedule& s, std::int64_t k, std::int64_t b,
                       std::int64_t m);

// ---------------------------------------------------------------------------
// Delay models

enum class DelayKind { None, Fixed, StaticDistribution, Observed };

std::string_view to_string(DelayKind kind);
DelayKind delay_kind_from_string(std::string_view name);

struct DelayModel {
  DelayKind kind = DelayKind::None;
  std::int64_t tau = 0;
  std::vector<double> probs;  // StaticDistribution: P(tau_k = j), j = 0..tau

  static DelayModel none() { return {}; }
  static DelayModel fixed(std::int64_t tau) {
    return {DelayKind::Fixed, tau, {}};
  }
  static DelayModel distribution(std::vector<double> p) {
    const auto tau = static_cast<std::int64_t>(p.size()) - 1;
    return {DelayKind::StaticDistribution, tau, std::move(p)};
  }
  /// Uniform law over {0..tau}.
  static DelayModel uniform(std::int64_t tau) {
    return distribution(std::vector<double>(static_cast<std::size_t>(tau + 1),
                                            1.0 / static_cast<double>(tau + 1)));
  }
  static DelayModel observed() { return {DelayKind::Observed, 0, {}}; }

  void validate() const;
};

// ---------------------------------------------------------------------------
// Run configuration

enum class RunMode { Sequential, SyncParallel, AsyncParallel };
enum class Method { Inertial, Momentum, HeavyBallBaseline };

std::string_view to_string(RunMode mode);
RunMode run_mode_from_string(std::string_view name);
std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct RunConfig {
  Method method = Method::Inertial;
  Schedule schedule;
  DelayModel delay;
  std::int64_t batch_size = 1;
  std::int64_t iterations = 1;  // K: number of applied updates
  std::uint64_t seed = 0;
  int workers = 0;
  RunMode mode = RunMode::Sequential;
  std::optional<std::int64_t> tau_max_discard;
  /// Async only: each worker waits for a newer iterate before computing.
  bool rendezvous = false;
  /// Artificial per-gradient compute cost in milliseconds (0 = none).
  double simulated_cost_ms = 0.0;
  /// Record the full objective every n updates; 0 = once per epoch.
  std::int64_t objective_every = 0;
  /// When false, wall_ms is recorded as 0 so traces are byte-reproducible.
  bool wall_clock = true;
  std::optional<Vector> x0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Traces

struct TraceRecord {
  std::int64_t k = 0;
  std::int64_t epoch = 0;
  std::optional<double> objective;  // phi(x^(k+1)) when recorded
  double step_norm = 0.0;           // ||x^(k+1) - x^(k)||
  std::int64_t observed_delay = 0;
  double wall_ms = 0.0;

  bool operator==(const TraceRecord&) const = default;
};

/// Compares every field except wall_ms.
bool same_trajectory(const TraceRecord& a, const TraceRecord& b);

struct DelayStats {
  std::int64_t min = 0;
  std::int64_t max = 0;
  double mean = 0.0;
  std::map<std::int64_t, std::int64_t> histogram;
  std::int64_t discarded = 0;

  static DelayStats from_delays(const std::vector<std::int64_t>& delays,
                                std::int64_t discarded);
};

struct Trace {
  std::vector<TraceRecord> records;
  double initial_objective = 0.0;
  Vector final_x;
  std::int64_t applied = 0;
  std::optional<DelayStats> delays;

  std::optional<double> final_objective() const;
  std::optional<double> best_objective() const;
  /// Last recorded objective with k <= the given iteration.
  std::optional<double> objective_at_or_before(std::int64_t k) const;
};

/// Equal records ignoring wall_ms, plus equal final iterate.
bool same_trajectory(const Trace& a, const Trace& b);

}  // namespace ipsg

#endif  // IPSG_CORE_HPP
