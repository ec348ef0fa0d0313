#ifndef IPSG_DIAGNOSTICS_HPP
#define IPSG_DIAGNOSTICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipsg/linalg.hpp"
#include "ipsg/problems.hpp"
#include "ipsg/random.hpp"

namespace ipsg {

// ---------------------------------------------------------------------------
// Moreau envelope gradient

struct MoreauConfig {
  double rho = 1.0;                  // weak-convexity constant of phi
  std::optional<double> rho_bar;     // envelope parameter, default 2 rho
  std::int64_t inner_budget = 1000;  // full-batch inner steps
  double inner_tol = 1e-12;          // stop when an inner step moves less
  /// Skip the closed form for quadratics (used to cross-check the solver).
  bool force_iterative = false;

  double resolved_rho_bar() const { return rho_bar.value_or(2.0 * rho); }
  void validate() const;
};

struct MoreauResult {
  double estimate = 0.0;  // rho_bar * ||x - x_tilde|| = ||grad phi_{1/rho_bar}(x)||
  Vector x_tilde;
  std::int64_t inner_steps = 0;
  bool closed_form = false;
};

/// Approximates x_tilde = argmin_y phi(y) + rho_bar/2 ||y - x||^2.
///
/// Quadratic problems with a separable regularizer are solved exactly.
/// Otherwise a full-batch inner solver runs on the (rho_bar - rho)-strongly
/// convex subproblem: proximal gradient with step 1/(rho + rho_bar) when the
/// problem is smooth, proximal subgradient with step 1/(rho_bar j) when it
/// is not. The iterate with the lowest subproblem value is returned, so
/// phi(x_tilde) <= phi(x) holds by construction; a violation beyond
/// rounding throws std::logic_error.
MoreauResult moreau_grad_norm(const Problem& problem, std::span<const double> x,
                              const MoreauConfig& cfg);

// ---------------------------------------------------------------------------
// Output iterate selection

/// Draws T from {k0..K} with P(T = k) proportional to alphas[k-1], where
/// alphas holds alpha_1..alpha_K.
std::int64_t select_T(std::span<const double> alphas, std::int64_t k0,
                      Rng& rng);

// ---------------------------------------------------------------------------
// Parameter feasibility

enum class Regime {
  WeaklyConvexFixed,
  WeaklyConvexVarying,
  CompositeFixed,
  CompositeVarying,
  SmoothConstant,
  SmoothShifted,
};

std::string_view to_string(Regime regime);
Regime regime_from_string(std::string_view name);

struct ConditionParams {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> beta_cap;  // beta tilde
  std::optional<double> K;
  std::optional<double> a;
  std::optional<double> rho;
  std::optional<double> rho_bar;
  std::optional<double> tau;
};

struct ConditionCheck {
  std::string name;
  std::string formula;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct ConditionReport {
  Regime regime = Regime::SmoothConstant;
  bool feasible = false;
  std::vector<ConditionCheck> checks;
  std::vector<std::string> violated;

  /// One line per inequality, then a verdict line.
  std::string to_text() const;
};

/// Evaluates every inequality of the regime literally. Throws
/// std::invalid_argument naming the first missing parameter.
ConditionReport check_parameter_conditions(Regime regime,
                                           const ConditionParams& params);

}  // namespace ipsg

#endif  // IPSG_DIAGNOSTICS_HPP
