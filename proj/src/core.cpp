#include "ipsg/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

namespace ipsg {

namespace {

template <typename Enum, std::size_t N>
Enum lookup(std::string_view name,
            const std::array<std::pair<std::string_view, Enum>, N>& table,
            std::string_view what) {
  for (const auto& [key, value] : table)
    if (key == name) return value;
  std::string msg = "invalid " + std::string(what) + " '" + std::string(name) +
                    "'; valid options: ";
  for (std::size_t i = 0; i < N; ++i) {
    if (i) msg += ", ";
    msg += table[i].first;
  }
  throw std::invalid_argument(msg);
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value,
                         const std::array<std::pair<std::string_view, Enum>, N>&
                             table) {
  for (const auto& [key, v] : table)
    if (v == value) return key;
  return "unknown";
}

constexpr std::array<std::pair<std::string_view, ScheduleKind>, 5>
    kScheduleNames{{{"fixed_horizon", ScheduleKind::FixedHorizon},
                    {"diminishing_sqrt_k", ScheduleKind::DiminishingSqrtK},
                    {"diminishing_shifted", ScheduleKind::DiminishingShifted},
                    {"constant", ScheduleKind::ConstantPair},
                    {"momentum_coupled", ScheduleKind::MomentumCoupled}}};

constexpr std::array<std::pair<std::string_view, DelayKind>, 4> kDelayNames{
    {{"none", DelayKind::None},
     {"fixed", DelayKind::Fixed},
     {"static", DelayKind::StaticDistribution},
     {"observed", DelayKind::Observed}}};

constexpr std::array<std::pair<std::string_view, RunMode>, 3> kModeNames{
    {{"sequential", RunMode::Sequential},
     {"sync_parallel", RunMode::SyncParallel},
     {"async_parallel", RunMode::AsyncParallel}}};

constexpr std::array<std::pair<std::string_view, Method>, 3> kMethodNames{
    {{"inertial", Method::Inertial},
     {"momentum", Method::Momentum},
     {"shb", Method::HeavyBallBaseline}}};

double base_alpha(ScheduleKind kind, const Schedule& s, std::int64_t k) {
  const double kk = static_cast<double>(k);
  switch (kind) {
    case ScheduleKind::FixedHorizon:
      if (k > s.horizon)
        throw ScheduleExhausted("schedule exhausted: k=" + std::to_string(k) +
                                " > K=" + std::to_string(s.horizon));
      return s.alpha / std::sqrt(static_cast<double>(s.horizon));
    case ScheduleKind::DiminishingSqrtK:
      return s.alpha / std::sqrt(kk);
    case ScheduleKind::DiminishingShifted:
      return s.alpha / std::sqrt(static_cast<double>(s.shift) + kk - 1.0);
    case ScheduleKind::ConstantPair:
      return s.alpha;
    case ScheduleKind::MomentumCoupled:
      break;
  }
  throw std::invalid_argument("momentum_coupled cannot be its own base rule");
}

}  // namespace

std::string_view to_string(ScheduleKind kind) {
  return name_of(kind, kScheduleNames);
}
ScheduleKind schedule_kind_from_string(std::string_view name) {
  return lookup(name, kScheduleNames, "schedule kind");
}
std::string_view to_string(DelayKind kind) { return name_of(kind, kDelayNames); }
DelayKind delay_kind_from_string(std::string_view name) {
  return lookup(name, kDelayNames, "delay kind");
}
std::string_view to_string(RunMode mode) { return name_of(mode, kModeNames); }
RunMode run_mode_from_string(std::string_view name) {
  return lookup(name, kModeNames, "mode");
}
std::string_view to_string(Method method) {
  return name_of(method, kMethodNames);
}
Method method_from_string(std::string_view name) {
  return lookup(name, kMethodNames, "method");
}

void Schedule::validate(bool allow_unit_beta) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("schedule: alpha must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("schedule: beta must be nonnegative");
  if (!(beta_cap >= 0.0 && beta_cap < 1.0))
    throw std::invalid_argument("schedule: beta_cap must lie in [0, 1)");
  const ScheduleKind step_rule =
      kind == ScheduleKind::MomentumCoupled ? coupled_base : kind;
  if (step_rule == ScheduleKind::MomentumCoupled)
    throw std::invalid_argument(
        "schedule: momentum_coupled needs a different base rule");
  if (step_rule == ScheduleKind::FixedHorizon && horizon < 1)
    throw std::invalid_argument("schedule: fixed_horizon requires K >= 1");
  if (step_rule == ScheduleKind::DiminishingShifted && shift < 1)
    throw std::invalid_argument("schedule: diminishing_shifted requires a >= 1");
  switch (kind) {
    case ScheduleKind::ConstantPair:
    case ScheduleKind::MomentumCoupled:
      if (beta > 1.0 || (beta == 1.0 && !allow_unit_beta))
        throw std::invalid_argument("schedule: beta must be < 1");
      break;
    case ScheduleKind::FixedHorizon:
      if (beta / std::pow(static_cast<double>(horizon), 0.25) >= 1.0)
        throw std::invalid_argument("schedule: beta/K^(1/4) must be < 1");
      break;
    default:
      break;
  }
}

double alpha_at(const Schedule& s, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("alpha_at: k must be >= 1");
  const ScheduleKind rule =
      s.kind == ScheduleKind::MomentumCoupled ? s.coupled_base : s.kind;
  return base_alpha(rule, s, k);
}

double beta_at(const Schedule& s, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("beta_at: k must be >= 1");
  const double kk = static_cast<double>(k);
  switch (s.kind) {
    case ScheduleKind::FixedHorizon:
      if (k > s.horizon)
        throw ScheduleExhausted("schedule exhausted: k=" + std::to_string(k) +
                                " > K=" + std::to_string(s.horizon));
      return s.beta / std::pow(static_cast<double>(s.horizon), 0.25);
    case ScheduleKind::DiminishingSqrtK:
      return std::min(s.beta_cap, s.beta / std::pow(kk, 0.25));
    case ScheduleKind::DiminishingShifted:
      return std::min(
          s.beta_cap,
          s.beta / std::pow(static_cast<double>(s.shift) + kk - 1.0, 0.25));
    case ScheduleKind::ConstantPair:
      return s.beta;
    case ScheduleKind::MomentumCoupled: {
      const double a_k = alpha_at(s, k);
      // alpha_0 := alpha_1, so beta_1 = beta.
      const double a_prev = k == 1 ? a_k : alpha_at(s, k - 1);
      return (a_k / a_prev) * s.beta;
    }
  }
  return 0.0;
}

std::int64_t epoch_of(std::int64_t k, std::int64_t b, std::int64_t m) {
  if (k < 1 || b < 1 || m < 1)
    throw std::invalid_argument("epoch_of: k, b, m must be >= 1");
  return (k - 1) * b / m;
}

StepParams step_params(const Schedule& s, std::int64_t k, std::int64_t b,
                       std::int64_t m) {
  if (!s.epoch_based) return {alpha_at(s, k), beta_at(s, k)};
  const std::int64_t idx = epoch_of(k, b, m) + 1;
  const double a = alpha_at(s, idx);
  if (s.kind != ScheduleKind::MomentumCoupled) return {a, beta_at(s, idx)};
  const double a_prev = k == 1 ? a : alpha_at(s, epoch_of(k - 1, b, m) + 1);
  return {a, (a / a_prev) * s.beta};
}

void DelayModel::validate() const {
  switch (kind) {
    case DelayKind::None:
      if (tau != 0) throw std::invalid_argument("delay none requires tau = 0");
      break;
    case DelayKind::Fixed:
      if (tau < 0) throw std::invalid_argument("delay: tau must be >= 0");
      break;
    case DelayKind::StaticDistribution: {
      if (tau < 0 || probs.size() != static_cast<std::size_t>(tau + 1))
        throw std::invalid_argument(
            "delay: static distribution needs tau+1 probabilities");
      double sum = 0.0;
      for (double p : probs) {
        if (!(p >= 0.0))
          throw std::invalid_argument("delay: probabilities must be >= 0");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("delay: probabilities must sum to 1");
      break;
    }
    case DelayKind::Observed:
      break;
  }
}

void RunConfig::validate() const {
  schedule.validate(method == Method::HeavyBallBaseline);
  delay.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (iterations < 1) throw std::invalid_argument("K must be >= 1");
  if (objective_every < 0)
    throw std::invalid_argument("objective_every must be >= 0");
  if (simulated_cost_ms < 0.0)
    throw std::invalid_argument("simulated_cost_ms must be >= 0");
  if (tau_max_discard && *tau_max_discard < 0)
    throw std::invalid_argument("tau_max_discard must be >= 0");
  if (mode != RunMode::Sequential) {
    if (workers < 1)
      throw std::invalid_argument("parallel modes require workers >= 1");
    if (delay.kind != DelayKind::None && delay.kind != DelayKind::Observed)
      throw std::invalid_argument(
          "parallel modes observe real delays; delay model must be none");
  } else if (delay.kind == DelayKind::Observed) {
    throw std::invalid_argument(
        "observed delays are produced only by the parallel runtime");
  }
}

bool same_trajectory(const TraceRecord& a, const TraceRecord& b) {
  return a.k == b.k && a.epoch == b.epoch && a.objective == b.objective &&
         a.step_norm == b.step_norm && a.observed_delay == b.observed_delay;
}

bool same_trajectory(const Trace& a, const Trace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    if (!same_trajectory(a.records[i], b.records[i])) return false;
  return a.initial_objective == b.initial_objective && a.final_x == b.final_x &&
         a.applied == b.applied;
}

DelayStats DelayStats::from_delays(const std::vector<std::int64_t>& delays,
                                   std::int64_t discarded) {
  DelayStats st;
  st.discarded = discarded;
  if (delays.empty()) return st;
  st.min = *std::min_element(delays.begin(), delays.end());
  st.max = *std::max_element(delays.begin(), delays.end());
  double sum = 0.0;
  for (auto d : delays) {
    sum += static_cast<double>(d);
    ++st.histogram[d];
  }
  st.mean = sum / static_cast<double>(delays.size());
  return st;
}

std::optional<double> Trace::final_objective() const {
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->objective) return it->objective;
  return std::nullopt;
}

std::optional<double> Trace::best_objective() const {
  std::optional<double> best;
  for (const auto& r : records)
    if (r.objective && (!best || *r.objective < *best)) best = r.objective;
  return best;
}

std::optional<double> Trace::objective_at_or_before(std::int64_t k) const {
  std::optional<double> out;
  for (const auto& r : records) {
    if (r.k > k) break;
    if (r.objective) out = r.objective;
  }
  return out;
}

}  // namespace ipsg
