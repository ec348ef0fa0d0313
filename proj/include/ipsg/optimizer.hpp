#ifndef IPSG_OPTIMIZER_HPP
#define IPSG_OPTIMIZER_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ipsg/core.hpp"
#include "ipsg/problems.hpp"
#include "ipsg/prox.hpp"
#include "ipsg/random.hpp"

namespace ipsg {

/// Ring buffer of the most recent iterates x^(k), x^(k-1), ..., x^(k-depth+1)
/// with their iteration stamps. Stamps at or below zero resolve to x^(1).
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t depth, Vector x1);

  void push(std::span<const double> x, std::int64_t stamp);
  /// x^(stamp); throws std::out_of_range if the stamp has left the window.
  const Vector& at_stamp(std::int64_t stamp) const;
  std::int64_t latest() const { return latest_; }
  std::size_t depth() const { return ring_.size(); }

 private:
  std::vector<Vector> ring_;
  Vector first_;
  std::int64_t latest_ = 1;
};

struct OptState {
  Iterate iterate;
  Vector momentum;  // m^(k), momentum form only; m^(0) = 0
  HistoryBuffer history;
  Vector scratch;

  OptState(Vector x0, std::int64_t tau);
  std::size_t dim() const { return iterate.dim(); }
};

/// x^(k+1) = prox_{alpha r}(x^(k) - alpha g + beta (x^(k) - x^(k-1))).
void step_inertial(OptState& state, std::span<const double> g, double alpha,
                   double beta, const Regularizer& r);

/// m <- beta m + (1 - beta) g;  x^(k+1) = x^(k) - alpha/(1-beta) m.
/// Valid only for r == 0 and beta in (0, 1).
void step_momentum(OptState& state, std::span<const double> g, double alpha,
                   double beta, const Regularizer& r);

/// Baseline heavy-ball step with the coefficient roles swapped:
/// x^(k+1) = Proj_X(x^(k) - alpha beta g + (1 - beta)(x^(k) - x^(k-1))).
void step_shb(OptState& state, std::span<const double> g, double alpha,
              double beta, const Regularizer& projection);

/// Staleness tau_k for iteration k, clamped to k - 1.
std::int64_t sample_delay(const DelayModel& model, std::int64_t k, Rng& rng);

/// Test and instrumentation hooks. All are optional.
struct RunHooks {
  /// Called by the computing thread right before each gradient evaluation.
  std::function<void(int worker)> before_gradient;
  /// Called by the master before applying update k with a gradient computed
  /// at x^(based_on_k).
  std::function<void(std::int64_t k, std::int64_t based_on_k)> on_gradient;
  /// Called by the master with x^(j) for j = 1 .. K+1.
  std::function<void(std::int64_t j, std::span<const double> x)> on_iterate;
};

/// Sleeps for the configured artificial gradient cost.
void simulate_gradient_cost(double ms);

/// Starting point: cfg.x0 if set, else the problem's seeded default.
Vector resolve_initial_point(const RunConfig& cfg, const Problem& problem);

/// Per-update sample count: W*b in sync mode, b otherwise.
std::int64_t samples_per_update(const RunConfig& cfg);

/// alpha_1 .. alpha_K as the engine will use them.
std::vector<double> step_sizes(const RunConfig& cfg, const Problem& problem);

/// Master-side update loop shared by every execution mode: applies one
/// update per gradient with the configured method and schedule, and keeps
/// the trace.
class UpdateEngine {
 public:
  UpdateEngine(const Problem& problem, const RunConfig& cfg, Vector x0,
               std::int64_t samples_per_update, std::size_t history_depth,
               const RunHooks& hooks);

  /// Index of the next update.
  std::int64_t k() const { return state_.iterate.k; }
  std::int64_t applied() const { return state_.iterate.k - 1; }
  bool done() const { return applied() >= cfg_.iterations; }
  const OptState& state() const { return state_; }

  /// Applies update k. Throws DivergenceError on non-finite data.
  void apply(std::span<const double> g, std::int64_t observed_delay);

  Trace finish(std::int64_t discarded = 0);

 private:
  bool objective_due(std::int64_t k) const;

  const Problem& problem_;
  const RunConfig& cfg_;
  const RunHooks& hooks_;
  std::int64_t samples_per_update_;
  std::int64_t m_;
  OptState state_;
  Trace trace_;
  std::vector<std::int64_t> delays_;
  std::chrono::steady_clock::time_point start_;
};

/// Single-threaded loop: for k = 1..K draw tau_k, evaluate the
/// minibatch subgradient at x^(k - tau_k) and apply the update.
/// Same cfg gives an identical trace (up to wall_ms).
Trace run_sequential(const RunConfig& cfg, const Problem& problem,
                     const RunHooks& hooks = {});

}  // namespace ipsg

#endif  // IPSG_OPTIMIZER_HPP
