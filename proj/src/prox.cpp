#include "ipsg/prox.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace ipsg {

namespace {

constexpr std::array<std::pair<std::string_view, RegularizerKind>, 5> kNames{
    {{"zero", RegularizerKind::Zero},
     {"l1", RegularizerKind::L1},
     {"box", RegularizerKind::Box},
     {"ball", RegularizerKind::Ball},
     {"box_l1", RegularizerKind::BoxL1}}};

void check_bounds(const Regularizer& r, std::size_t n) {
  const bool ok = (r.lo.size() == 1 || r.lo.size() == n) &&
                  (r.hi.size() == 1 || r.hi.size() == n);
  if (!ok)
    throw std::invalid_argument("box bounds do not match dimension " +
                                std::to_string(n));
}

}  // namespace

std::string_view to_string(RegularizerKind kind) {
  for (const auto& [name, k] : kNames)
    if (k == kind) return name;
  return "unknown";
}

RegularizerKind regularizer_kind_from_string(std::string_view name) {
  for (const auto& [key, k] : kNames)
    if (key == name) return k;
  throw std::invalid_argument("invalid regularizer kind '" + std::string(name) +
                              "'; valid options: zero, l1, box, ball, box_l1");
}

Regularizer Regularizer::l1(double lambda) {
  Regularizer r;
  r.kind = RegularizerKind::L1;
  r.lambda = lambda;
  r.validate();
  return r;
}

Regularizer Regularizer::box(Vector lo, Vector hi) {
  Regularizer r;
  r.kind = RegularizerKind::Box;
  r.lo = std::move(lo);
  r.hi = std::move(hi);
  r.validate();
  return r;
}

Regularizer Regularizer::ball(double radius) {
  Regularizer r;
  r.kind = RegularizerKind::Ball;
  r.radius = radius;
  r.validate();
  return r;
}

Regularizer Regularizer::box_l1(Vector lo, Vector hi, double lambda) {
  Regularizer r;
  r.kind = RegularizerKind::BoxL1;
  r.lo = std::move(lo);
  r.hi = std::move(hi);
  r.lambda = lambda;
  r.validate();
  return r;
}

void Regularizer::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("regularizer: lambda must be >= 0");
  if (kind == RegularizerKind::Ball && !(radius > 0.0))
    throw std::invalid_argument("regularizer: ball radius must be > 0");
  if (kind == RegularizerKind::Box || kind == RegularizerKind::BoxL1) {
    if (lo.empty() || hi.empty())
      throw std::invalid_argument("regularizer: box bounds missing");
    const std::size_t n = std::max(lo.size(), hi.size());
    check_bounds(*this, n);
    for (std::size_t i = 0; i < n; ++i)
      if (!(lower(i) <= upper(i)))
        throw std::invalid_argument("regularizer: box requires lo <= hi");
  }
}

double prox_coordinate(const Regularizer& r, double alpha, double x,
                       std::size_t i) {
  switch (r.kind) {
    case RegularizerKind::Zero:
      return x;
    case RegularizerKind::L1:
      return soft_threshold(x, alpha * r.lambda);
    case RegularizerKind::Box:
      return std::clamp(x, r.lower(i), r.upper(i));
    case RegularizerKind::BoxL1:
      // Per coordinate the objective is convex in one variable, so its
      // minimizer over [lo, hi] is the clamp of the unconstrained minimizer
      // (the soft-threshold).
      return std::clamp(soft_threshold(x, alpha * r.lambda), r.lower(i),
                        r.upper(i));
    case RegularizerKind::Ball:
      break;
  }
  throw std::invalid_argument("prox_coordinate: ball is not separable");
}

void prox(const Regularizer& r, double alpha, std::span<const double> x,
          std::span<double> out) {
  if (!(alpha > 0.0)) throw std::invalid_argument("prox: alpha must be > 0");
  if (!all_finite(x))
    throw std::invalid_argument("prox: non-finite input coordinate");
  if (r.kind == RegularizerKind::Box || r.kind == RegularizerKind::BoxL1)
    check_bounds(r, x.size());
  if (r.kind == RegularizerKind::Ball) {
    const double nrm = norm2(x);
    const double scale = nrm > r.radius ? r.radius / nrm : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = prox_coordinate(r, alpha, x[i], i);
}

Vector prox(const Regularizer& r, double alpha, std::span<const double> x) {
  Vector out(x.size());
  prox(r, alpha, x, out);
  return out;
}

double eval_r(const Regularizer& r, std::span<const double> x) {
  auto in_box = [&] {
    check_bounds(r, x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < r.lower(i) || x[i] > r.upper(i)) return false;
    return true;
  };
  auto l1 = [&] {
    double s = 0.0;
    for (double v : x) s += std::fabs(v);
    return r.lambda * s;
  };
  switch (r.kind) {
    case RegularizerKind::Zero:
      return 0.0;
    case RegularizerKind::L1:
      return l1();
    case RegularizerKind::Box:
      return in_box() ? 0.0 : kInfeasible;
    case RegularizerKind::Ball:
      return norm2(x) <= r.radius * (1.0 + 1e-12) ? 0.0 : kInfeasible;
    case RegularizerKind::BoxL1:
      return in_box() ? l1() : kInfeasible;
  }
  return 0.0;
}

}  // namespace ipsg
