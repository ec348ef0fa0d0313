#ifndef IPSG_PROX_HPP
#define IPSG_PROX_HPP

#include <limits>
#include <span>
#include <string_view>

#include "ipsg/linalg.hpp"

namespace ipsg {

enum class RegularizerKind { Zero, L1, Box, Ball, BoxL1 };

std::string_view to_string(RegularizerKind kind);
RegularizerKind regularizer_kind_from_string(std::string_view name);

/// Convex regularizer r with a closed-form proximal mapping.
///
/// Box bounds are per coordinate; a single-element bound vector applies to
/// every coordinate.
struct Regularizer {
  RegularizerKind kind = RegularizerKind::Zero;
  double lambda = 0.0;
  Vector lo;
  Vector hi;
  double radius = 0.0;

  static Regularizer zero() { return {}; }
  static Regularizer l1(double lambda);
  static Regularizer box(Vector lo, Vector hi);
  static Regularizer ball(double radius);
  static Regularizer box_l1(Vector lo, Vector hi, double lambda);

  void validate() const;
  bool is_projection() const {
    return kind == RegularizerKind::Zero || kind == RegularizerKind::Box ||
           kind == RegularizerKind::Ball;
  }
  bool is_separable() const { return kind != RegularizerKind::Ball; }

  double lower(std::size_t i) const { return lo.size() == 1 ? lo[0] : lo[i]; }
  double upper(std::size_t i) const { return hi.size() == 1 ? hi[0] : hi[i]; }
};

/// Value returned by eval_r outside dom(r).
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// argmin_y r(y) + ||y - x||^2 / (2 alpha), written into out.
/// out may alias x.
void prox(const Regularizer& r, double alpha, std::span<const double> x,
          std::span<double> out);
Vector prox(const Regularizer& r, double alpha, std::span<const double> x);

/// One coordinate of a separable prox with its own step alpha.
double prox_coordinate(const Regularizer& r, double alpha, double x,
                       std::size_t i);

/// r(x), or kInfeasible when x violates a constraint. Ball membership is
/// tested with a relative slack of 1e-12 so projected points stay feasible.
double eval_r(const Regularizer& r, std::span<const double> x);

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace ipsg

#endif  // IPSG_PROX_HPP
