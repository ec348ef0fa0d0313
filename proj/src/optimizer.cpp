#include "ipsg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "ipsg/sampling.hpp"

namespace ipsg {

// ---------------------------------------------------------------------------
// HistoryBuffer

HistoryBuffer::HistoryBuffer(std::size_t depth, Vector x1)
    : ring_(std::max<std::size_t>(depth, 1)), first_(std::move(x1)) {
  ring_[1 % ring_.size()] = first_;
}

void HistoryBuffer::push(std::span<const double> x, std::int64_t stamp) {
  if (stamp != latest_ + 1)
    throw std::logic_error("HistoryBuffer: stamps must be consecutive");
  auto& slot = ring_[static_cast<std::size_t>(stamp) % ring_.size()];
  slot.assign(x.begin(), x.end());
  latest_ = stamp;
}

const Vector& HistoryBuffer::at_stamp(std::int64_t stamp) const {
  if (stamp <= 1) return first_;
  const auto depth = static_cast<std::int64_t>(ring_.size());
  if (stamp > latest_ || stamp <= latest_ - depth)
    throw std::out_of_range("HistoryBuffer: stamp " + std::to_string(stamp) +
                            " outside window ending at " +
                            std::to_string(latest_));
  return ring_[static_cast<std::size_t>(stamp) % ring_.size()];
}

OptState::OptState(Vector x0, std::int64_t tau)
    : iterate(x0),
      momentum(x0.size(), 0.0),
      history(static_cast<std::size_t>(tau) + 1, x0),
      scratch(x0.size()) {}

// ---------------------------------------------------------------------------
// Steps

namespace {

void check_gradient(const OptState& state, std::span<const double> g) {
  if (g.size() != state.dim())
    throw std::invalid_argument("gradient dimension mismatch");
  if (!all_finite(g))
    throw DivergenceError(state.iterate.k,
                          "non-finite gradient at k=" +
                              std::to_string(state.iterate.k));
}

// Rotates scratch into x_curr, x_curr into x_prev, and records the stamp.
void commit(OptState& state) {
  auto& it = state.iterate;
  std::swap(it.x_prev, it.x_curr);
  std::swap(it.x_curr, state.scratch);
  ++it.k;
  state.history.push(it.x_curr, it.k);
}

}  // namespace

void step_inertial(OptState& state, std::span<const double> g, double alpha,
                   double beta, const Regularizer& r) {
  if (!(alpha > 0.0)) throw std::invalid_argument("step: alpha must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("step: beta must be >= 0");
  check_gradient(state, g);
  const auto& x = state.iterate.x_curr;
  const auto& xp = state.iterate.x_prev;
  auto& y = state.scratch;
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i] - alpha * g[i] + beta * (x[i] - xp[i]);
  prox(r, alpha, y, y);
  commit(state);
}

void step_momentum(OptState& state, std::span<const double> g, double alpha,
                   double beta, const Regularizer& r) {
  if (r.kind != RegularizerKind::Zero)
    throw std::invalid_argument(
        "momentum form requires r == 0; use the inertial step");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("momentum form requires beta in (0, 1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("step: alpha must be > 0");
  check_gradient(state, g);
  auto& m = state.momentum;
  const auto& x = state.iterate.x_curr;
  auto& y = state.scratch;
  const double scale = alpha / (1.0 - beta);
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = beta * m[i] + (1.0 - beta) * g[i];
    y[i] = x[i] - scale * m[i];
  }
  commit(state);
}

void step_shb(OptState& state, std::span<const double> g, double alpha,
              double beta, const Regularizer& projection) {
  if (!projection.is_projection())
    throw std::invalid_argument(
        "heavy-ball baseline needs a projection (zero, box or ball)");
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("heavy-ball baseline requires beta in (0, 1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("step: alpha must be > 0");
  check_gradient(state, g);
  const auto& x = state.iterate.x_curr;
  const auto& xp = state.iterate.x_prev;
  auto& y = state.scratch;
  const double step = alpha * beta;
  const double inertia = 1.0 - beta;
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i] - step * g[i] + inertia * (x[i] - xp[i]);
  prox(projection, 1.0, y, y);
  commit(state);
}

std::int64_t sample_delay(const DelayModel& model, std::int64_t k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_delay: k must be >= 1");
  switch (model.kind) {
    case DelayKind::None:
      return 0;
    case DelayKind::Fixed:
      return std::min(model.tau, k - 1);
    case DelayKind::StaticDistribution: {
      const double u = rng.uniform();
      double acc = 0.0;
      std::int64_t j = model.tau;
      for (std::size_t i = 0; i < model.probs.size(); ++i) {
        acc += model.probs[i];
        if (u < acc) {
          j = static_cast<std::int64_t>(i);
          break;
        }
      }
      return std::min(j, k - 1);
    }
    case DelayKind::Observed:
      break;
  }
  throw std::logic_error(
      "observed delays come from the parallel runtime, not a sampler");
}

// ---------------------------------------------------------------------------
// Run helpers

void simulate_gradient_cost(double ms) {
  if (ms > 0.0)
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

Vector resolve_initial_point(const RunConfig& cfg, const Problem& problem) {
  if (cfg.x0) {
    if (cfg.x0->size() != problem.dim())
      throw std::invalid_argument("x0 has dimension " +
                                  std::to_string(cfg.x0->size()) +
                                  ", problem has " +
                                  std::to_string(problem.dim()));
    return *cfg.x0;
  }
  Rng rng(derive_seed(cfg.seed, streams::kInitialPoint));
  return problem.initial_point(rng);
}

std::int64_t samples_per_update(const RunConfig& cfg) {
  return cfg.mode == RunMode::SyncParallel
             ? cfg.batch_size * static_cast<std::int64_t>(cfg.workers)
             : cfg.batch_size;
}

std::vector<double> step_sizes(const RunConfig& cfg, const Problem& problem) {
  const auto m = static_cast<std::int64_t>(problem.num_samples());
  const auto b = samples_per_update(cfg);
  std::vector<double> out(static_cast<std::size_t>(cfg.iterations));
  for (std::int64_t k = 1; k <= cfg.iterations; ++k)
    out[static_cast<std::size_t>(k - 1)] =
        step_params(cfg.schedule, k, b, m).alpha;
  return out;
}

// ---------------------------------------------------------------------------
// UpdateEngine

UpdateEngine::UpdateEngine(const Problem& problem, const RunConfig& cfg,
                           Vector x0, std::int64_t samples_per_update,
                           std::size_t history_depth, const RunHooks& hooks)
    : problem_(problem),
      cfg_(cfg),
      hooks_(hooks),
      samples_per_update_(samples_per_update),
      m_(static_cast<std::int64_t>(problem.num_samples())),
      state_(std::move(x0), static_cast<std::int64_t>(history_depth) - 1),
      start_(std::chrono::steady_clock::now()) {
  if (state_.dim() != problem.dim())
    throw std::invalid_argument("initial point dimension mismatch");
  trace_.initial_objective = problem_.full_objective(state_.iterate.x_curr);
  trace_.records.reserve(static_cast<std::size_t>(cfg.iterations));
  delays_.reserve(static_cast<std::size_t>(cfg.iterations));
  if (hooks_.on_iterate) hooks_.on_iterate(1, state_.iterate.x_curr);
}

bool UpdateEngine::objective_due(std::int64_t k) const {
  if (k == cfg_.iterations) return true;
  if (cfg_.objective_every > 0) return k % cfg_.objective_every == 0;
  return epoch_of(k + 1, samples_per_update_, m_) !=
         epoch_of(k, samples_per_update_, m_);
}

void UpdateEngine::apply(std::span<const double> g,
                         std::int64_t observed_delay) {
  if (done()) throw std::logic_error("UpdateEngine: all K updates applied");
  const std::int64_t k = state_.iterate.k;
  const auto params = step_params(cfg_.schedule, k, samples_per_update_, m_);
  const auto& r = problem_.regularizer();
  switch (cfg_.method) {
    case Method::Inertial:
      step_inertial(state_, g, params.alpha, params.beta, r);
      break;
    case Method::Momentum:
      step_momentum(state_, g, params.alpha, cfg_.schedule.beta, r);
      break;
    case Method::HeavyBallBaseline:
      step_shb(state_, g, params.alpha, params.beta, r);
      break;
  }
  const auto& x = state_.iterate.x_curr;
  if (!all_finite(x))
    throw DivergenceError(k, "non-finite iterate at k=" + std::to_string(k));

  TraceRecord rec;
  rec.k = k;
  rec.epoch = epoch_of(k, samples_per_update_, m_);
  rec.step_norm = distance(x, state_.iterate.x_prev);
  rec.observed_delay = observed_delay;
  if (objective_due(k)) {
    const double obj = problem_.full_objective(x);
    if (!std::isfinite(obj) && obj != kInfeasible)
      throw DivergenceError(k, "non-finite objective at k=" + std::to_string(k));
    rec.objective = obj;
  }
  if (cfg_.wall_clock)
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start_)
                      .count();
  trace_.records.push_back(rec);
  delays_.push_back(observed_delay);
  if (hooks_.on_iterate) hooks_.on_iterate(k + 1, x);
}

Trace UpdateEngine::finish(std::int64_t discarded) {
  trace_.final_x = state_.iterate.x_curr;
  trace_.applied = applied();
  trace_.delays = DelayStats::from_delays(delays_, discarded);
  return std::move(trace_);
}

// ---------------------------------------------------------------------------
// Sequential runner

Trace run_sequential(const RunConfig& cfg, const Problem& problem,
                     const RunHooks& hooks) {
  cfg.validate();
  if (cfg.mode != RunMode::Sequential)
    throw std::invalid_argument("run_sequential requires mode = sequential");
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  BatchStream stream(problem.num_samples(), b,
                     derive_seed(cfg.seed, streams::kBatches));
  Rng delay_rng(derive_seed(cfg.seed, streams::kDelays));
  UpdateEngine engine(problem, cfg, resolve_initial_point(cfg, problem),
                      cfg.batch_size,
                      static_cast<std::size_t>(cfg.delay.tau) + 1, hooks);
  while (!engine.done()) {
    const std::int64_t k = engine.k();
    const std::int64_t tau = sample_delay(cfg.delay, k, delay_rng);
    const Vector& stale = engine.state().history.at_stamp(k - tau);
    const Batch batch = stream.next();
    if (hooks.before_gradient) hooks.before_gradient(0);
    simulate_gradient_cost(cfg.simulated_cost_ms);
    const Vector g = problem.sample_subgradient(stale, batch.indices);
    if (hooks.on_gradient) hooks.on_gradient(k, k - tau);
    engine.apply(g, tau);
  }
  return engine.finish();
}

}  // namespace ipsg
