#include "ipsg/diagnostics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include "ipsg/prox.hpp"

namespace ipsg {

void MoreauConfig::validate() const {
  if (!(rho > 0.0)) throw std::invalid_argument("moreau: rho must be > 0");
  if (!(resolved_rho_bar() > rho))
    throw std::invalid_argument("moreau: rho_bar must exceed rho");
  if (inner_budget < 1)
    throw std::invalid_argument("moreau: inner_budget must be >= 1");
  if (!(inner_tol >= 0.0))
    throw std::invalid_argument("moreau: inner_tol must be >= 0");
}

namespace {

MoreauResult quadratic_closed_form(const QuadraticProblem& q,
                                   std::span<const double> x, double rho_bar) {
  // Per coordinate the subproblem is (d+rho_bar)/2 (y - z)^2 + r_i(y) + const
  // with z = (d c + rho_bar x)/(d + rho_bar), i.e. a 1-D prox at step
  // 1/(d + rho_bar).
  const auto& d = q.diag();
  const auto& c = q.center();
  MoreauResult res;
  res.closed_form = true;
  res.x_tilde.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = d[i] + rho_bar;
    const double z = (d[i] * c[i] + rho_bar * x[i]) / w;
    res.x_tilde[i] = prox_coordinate(q.regularizer(), 1.0 / w, z, i);
  }
  res.estimate = rho_bar * distance(x, res.x_tilde);
  return res;
}

MoreauResult inner_solve(const Problem& problem, std::span<const double> x,
                         const MoreauConfig& cfg, double rho_bar) {
  const auto& r = problem.regularizer();
  auto psi = [&](std::span<const double> y) {
    const double dist = distance(y, x);
    return problem.full_objective(y) + 0.5 * rho_bar * dist * dist;
  };

  Vector y(x.begin(), x.end());
  Vector best = y;
  double best_psi = psi(y);
  Vector next(y.size());
  MoreauResult res;
  const bool smooth = problem.is_smooth();
  for (std::int64_t j = 1; j <= cfg.inner_budget; ++j) {
    const Vector g = problem.full_subgradient(y);
    const double eta = smooth ? 1.0 / (cfg.rho + rho_bar)
                              : 1.0 / (rho_bar * static_cast<double>(j));
    for (std::size_t i = 0; i < y.size(); ++i)
      next[i] = y[i] - eta * (g[i] + rho_bar * (y[i] - x[i]));
    prox(r, eta, next, next);
    const double moved = distance(next, y);
    std::swap(y, next);
    res.inner_steps = j;
    const double v = psi(y);
    if (v < best_psi) {
      best_psi = v;
      best = y;
    }
    if (moved <= cfg.inner_tol) break;
  }
  res.x_tilde = std::move(best);
  res.estimate = rho_bar * distance(x, res.x_tilde);
  return res;
}

}  // namespace

MoreauResult moreau_grad_norm(const Problem& problem, std::span<const double> x,
                              const MoreauConfig& cfg) {
  cfg.validate();
  if (x.size() != problem.dim())
    throw std::invalid_argument("moreau: dimension mismatch");
  const double rho_bar = cfg.resolved_rho_bar();

  MoreauResult res;
  const auto* quad = dynamic_cast<const QuadraticProblem*>(&problem);
  if (quad && quad->regularizer().is_separable() && !cfg.force_iterative)
    res = quadratic_closed_form(*quad, x, rho_bar);
  else
    res = inner_solve(problem, x, cfg, rho_bar);

  const double phi_x = problem.full_objective(x);
  const double phi_t = problem.full_objective(res.x_tilde);
  if (phi_t > phi_x + 1e-12 * (1.0 + std::fabs(phi_x)))
    throw std::logic_error("moreau: phi(x_tilde) exceeds phi(x)");
  return res;
}

std::int64_t select_T(std::span<const double> alphas, std::int64_t k0,
                      Rng& rng) {
  const auto K = static_cast<std::int64_t>(alphas.size());
  if (k0 < 1 || k0 > K)
    throw std::invalid_argument("select_T: empty range {" +
                                std::to_string(k0) + ".." + std::to_string(K) +
                                "}");
  double total = 0.0;
  for (std::int64_t k = k0; k <= K; ++k) {
    const double a = alphas[static_cast<std::size_t>(k - 1)];
    if (!(a > 0.0)) throw std::invalid_argument("select_T: alphas must be > 0");
    total += a;
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::int64_t k = k0; k <= K; ++k) {
    acc += alphas[static_cast<std::size_t>(k - 1)];
    if (u < acc) return k;
  }
  return K;
}

// ---------------------------------------------------------------------------
// Conditions

namespace {

constexpr std::array<std::pair<std::string_view, Regime>, 6> kRegimes{{
    {"weakly_convex_fixed", Regime::WeaklyConvexFixed},
    {"weakly_convex_varying", Regime::WeaklyConvexVarying},
    {"composite_fixed", Regime::CompositeFixed},
    {"composite_varying", Regime::CompositeVarying},
    {"smooth_constant", Regime::SmoothConstant},
    {"smooth_shifted", Regime::SmoothShifted},
}};

class Checker {
 public:
  Checker(Regime regime, const ConditionParams& p) : p_(p) {
    report_.regime = regime;
  }

  double need(const std::optional<double>& v, const char* name) const {
    if (!v)
      throw std::invalid_argument(
          std::string("check_parameter_conditions: regime ") +
          std::string(to_string(report_.regime)) + " requires parameter '" +
          name + "'");
    return *v;
  }

  // lhs <= rhs, or lhs < rhs when strict.
  void le(const char* name, const char* formula, double lhs, double rhs,
          bool strict = false) {
    const bool ok = strict ? lhs < rhs : lhs <= rhs;
    report_.checks.push_back({name, formula, lhs, rhs, ok});
    if (!ok) report_.violated.emplace_back(name);
  }

  ConditionReport finish() {
    report_.feasible = report_.violated.empty();
    return std::move(report_);
  }

  const ConditionParams& p_;

 private:
  ConditionReport report_;
};

// Shared by the two smooth regimes; n is K (constant) or a (shifted).
void smooth_tail(Checker& c, double alpha, double beta, double rho, double tau,
                 double n) {
  const double b2 = beta * beta;
  c.le("tau_condition",
       "tau^2 + tau/(1-beta) + beta^2/(1-beta^2) <= (1-beta)^2 n/(2 alpha^2 "
       "rho^2)",
       tau * tau + tau / (1.0 - beta) + b2 / (1.0 - b2),
       (1.0 - beta) * (1.0 - beta) * n / (2.0 * alpha * alpha * rho * rho));
  c.le("step_condition",
       "3 rho + 2(1+5 rho) beta^2/((1-beta)(1-beta^2)) <= (1-beta) sqrt(n)/(2 "
       "alpha)",
       3.0 * rho + 2.0 * (1.0 + 5.0 * rho) * b2 / ((1.0 - beta) * (1.0 - b2)),
       (1.0 - beta) * std::sqrt(n) / (2.0 * alpha));
}

}  // namespace

std::string_view to_string(Regime regime) {
  for (const auto& [name, r] : kRegimes)
    if (r == regime) return name;
  return "unknown";
}

Regime regime_from_string(std::string_view name) {
  for (const auto& [n, r] : kRegimes)
    if (n == name) return r;
  std::string msg = "invalid regime '" + std::string(name) + "'; valid options: ";
  for (std::size_t i = 0; i < kRegimes.size(); ++i) {
    if (i) msg += ", ";
    msg += kRegimes[i].first;
  }
  throw std::invalid_argument(msg);
}

ConditionReport check_parameter_conditions(Regime regime,
                                           const ConditionParams& params) {
  Checker c(regime, params);
  const auto& p = params;
  switch (regime) {
    case Regime::WeaklyConvexFixed: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta = c.need(p.beta, "beta");
      const double K = c.need(p.K, "K");
      const double rho = c.need(p.rho, "rho");
      const double rho_bar = c.need(p.rho_bar, "rho_bar");
      const double sK = std::sqrt(K);
      c.le("rho_bar_above_rho", "rho < rho_bar", rho, rho_bar, true);
      c.le("rho_bar_at_most_2rho", "rho_bar <= 2 rho", rho_bar, 2.0 * rho);
      c.le("beta_nonnegative", "0 <= beta", 0.0, beta);
      c.le("step_bound", "alpha/sqrt(K) <= 1/rho_bar", alpha / sK,
           1.0 / rho_bar);
      c.le("inertia_bound", "beta/K^(1/4) < 1 - alpha rho/(2 sqrt(K))",
           beta / std::pow(K, 0.25), 1.0 - alpha * rho / (2.0 * sK), true);
      break;
    }
    case Regime::WeaklyConvexVarying: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta_cap = c.need(p.beta_cap, "beta_cap");
      const double rho = c.need(p.rho, "rho");
      const double rho_bar = c.need(p.rho_bar, "rho_bar");
      c.le("rho_bar_above_rho", "rho < rho_bar", rho, rho_bar, true);
      c.le("rho_bar_at_most_2rho", "rho_bar <= 2 rho", rho_bar, 2.0 * rho);
      c.le("alpha_positive", "0 < alpha", 0.0, alpha, true);
      c.le("step_bound", "alpha <= 1/rho_bar", alpha, 1.0 / rho_bar);
      c.le("beta_cap_nonnegative", "0 <= beta_cap", 0.0, beta_cap);
      c.le("beta_cap_bound", "beta_cap < 1 - alpha rho/2", beta_cap,
           1.0 - alpha * rho / 2.0, true);
      break;
    }
    case Regime::CompositeFixed: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta = c.need(p.beta, "beta");
      const double K = c.need(p.K, "K");
      const double rho = c.need(p.rho, "rho");
      const double rho_bar = c.need(p.rho_bar, "rho_bar");
      const double tau = c.need(p.tau, "tau");
      const double sK = std::sqrt(K);
      c.le("rho_bar_above_rho", "rho < rho_bar", rho, rho_bar, true);
      c.le("step_bound", "alpha/sqrt(K) <= 1/rho_bar", alpha / sK,
           1.0 / rho_bar);
      const double gamma = 0.5 - alpha * rho / (2.0 * sK) -
                           tau * tau * alpha * alpha * rho * rho / K -
                           beta / std::pow(K, 0.25);
      c.le("gamma_positive",
           "0 < 1/2 - alpha rho/(2 sqrt(K)) - tau^2 alpha^2 rho^2/K - "
           "beta/K^(1/4)",
           0.0, gamma, true);
      break;
    }
    case Regime::CompositeVarying: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta_cap = c.need(p.beta_cap, "beta_cap");
      const double a = c.need(p.a, "a");
      const double rho = c.need(p.rho, "rho");
      const double rho_bar = c.need(p.rho_bar, "rho_bar");
      const double tau = c.need(p.tau, "tau");
      c.le("rho_bar_above_rho", "rho < rho_bar", rho, rho_bar, true);
      c.le("shift_min", "1 <= a", 1.0, a);
      c.le("step_bound", "alpha/sqrt(a) <= 1/rho_bar", alpha / std::sqrt(a),
           1.0 / rho_bar);
      const double gamma =
          0.5 * (1.0 - alpha * rho / std::sqrt(a) - beta_cap * beta_cap -
                 2.0 * tau * tau * rho * rho * alpha * alpha / a);
      c.le("gamma_positive",
           "0 < (1 - alpha rho/sqrt(a) - beta_cap^2 - 2 tau^2 rho^2 alpha^2/a)/2",
           0.0, gamma, true);
      break;
    }
    case Regime::SmoothConstant: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta = c.need(p.beta, "beta");
      const double K = c.need(p.K, "K");
      const double rho = c.need(p.rho, "rho");
      const double tau = c.need(p.tau, "tau");
      c.le("beta_nonnegative", "0 <= beta", 0.0, beta);
      c.le("beta_below_one", "beta < 1", beta, 1.0, true);
      if (beta < 1.0) smooth_tail(c, alpha, beta, rho, tau, K);
      break;
    }
    case Regime::SmoothShifted: {
      const double alpha = c.need(p.alpha, "alpha");
      const double beta = c.need(p.beta, "beta");
      const double a = c.need(p.a, "a");
      const double rho = c.need(p.rho, "rho");
      const double tau = c.need(p.tau, "tau");
      c.le("beta_nonnegative", "0 <= beta", 0.0, beta);
      c.le("beta_below_one", "beta < 1", beta, 1.0, true);
      c.le("shift_min", "1 <= a", 1.0, a);
      c.le("shift_vs_delay", "2 tau <= a", 2.0 * tau, a);
      c.le("shift_growth", "(1-beta)/(2 alpha) <= a sqrt(a+1)",
           (1.0 - beta) / (2.0 * alpha), a * std::sqrt(a + 1.0));
      if (beta < 1.0) smooth_tail(c, alpha, beta, rho, tau, a);
      break;
    }
  }
  return c.finish();
}

std::string ConditionReport::to_text() const {
  std::string out;
  char buf[128];
  for (const auto& ch : checks) {
    std::snprintf(buf, sizeof buf, "  [%s] %-22s lhs=%.6g rhs=%.6g  ",
                  ch.holds ? " ok " : "FAIL", ch.name.c_str(), ch.lhs, ch.rhs);
    out += buf;
    out += ch.formula;
    out += '\n';
  }
  out += "regime ";
  out += to_string(regime);
  out += feasible ? ": feasible\n" : ": infeasible (";
  if (!feasible) {
    for (std::size_t i = 0; i < violated.size(); ++i) {
      if (i) out += ", ";
      out += violated[i];
    }
    out += ")\n";
  }
  return out;
}

}  // namespace ipsg
