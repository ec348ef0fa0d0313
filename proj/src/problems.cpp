#include "ipsg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace ipsg {

// ---------------------------------------------------------------------------
// Problem

Vector Problem::initial_point(Rng& rng) const {
  Vector x(dim());
  for (auto& v : x) v = rng.gaussian();
  return x;
}

void Problem::check_dim(std::span<const double> x) const {
  if (x.size() != dim())
    throw std::invalid_argument("dimension mismatch: expected " +
                                std::to_string(dim()) + ", got " +
                                std::to_string(x.size()));
}

Vector Problem::sample_subgradient(std::span<const double> x,
                                   std::span<const std::size_t> batch) const {
  check_dim(x);
  if (batch.empty()) throw std::invalid_argument("empty minibatch");
  const std::size_t m = num_samples();
  for (auto i : batch)
    if (i >= m)
      throw std::out_of_range("sample index " + std::to_string(i) +
                              " out of range [0, " + std::to_string(m) + ")");
  Vector g(dim(), 0.0);
  for (auto i : batch) add_sample_subgradient(x, i, g);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : g) v *= inv;
  return g;
}

Vector Problem::full_subgradient(std::span<const double> x) const {
  check_dim(x);
  Vector g(dim(), 0.0);
  const std::size_t m = num_samples();
  for (std::size_t i = 0; i < m; ++i) add_sample_subgradient(x, i, g);
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : g) v *= inv;
  return g;
}

double Problem::data_loss(std::span<const double> x) const {
  check_dim(x);
  const std::size_t m = num_samples();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += sample_loss(x, i);
  return s / static_cast<double>(m);
}

double Problem::full_objective(std::span<const double> x) const {
  const double r = eval_r(regularizer_, x);
  if (r == kInfeasible) return kInfeasible;
  return data_loss(x) + r;
}

// ---------------------------------------------------------------------------
// Phase retrieval

std::shared_ptr<const MeasurementData> generate_phase_retrieval(
    std::size_t m, std::size_t d, std::uint64_t seed,
    std::optional<Vector> ground_truth) {
  if (m < 1 || d < 1)
    throw std::invalid_argument("phase retrieval: m and d must be >= 1");
  if (ground_truth && ground_truth->size() != d)
    throw std::invalid_argument("phase retrieval: ground truth has dimension " +
                                std::to_string(ground_truth->size()) +
                                ", expected " + std::to_string(d));
  Rng rng(derive_seed(seed, streams::kInstance));
  auto data = std::make_shared<MeasurementData>();
  data->m = m;
  data->d = d;
  data->a.resize(m * d);
  for (auto& v : data->a) v = rng.gaussian();
  if (ground_truth) {
    data->x_star = std::move(*ground_truth);
  } else {
    data->x_star.resize(d);
    double nrm = 0.0;
    do {
      for (auto& v : data->x_star) v = rng.gaussian();
      nrm = norm2(data->x_star);
    } while (nrm == 0.0);
    for (auto& v : data->x_star) v /= nrm;
  }
  data->b.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    data->b[i] = std::fabs(dot(data->row(i), data->x_star));
  return data;
}

double phase_retrieval_rho(const MeasurementData& data) {
  Vector v(data.d, 1.0 / std::sqrt(static_cast<double>(data.d)));
  Vector w(data.d);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < data.m; ++i) axpy(dot(data.row(i), v), data.row(i), w);
    for (auto& e : w) e /= static_cast<double>(data.m);
    const double next = norm2(w);
    if (next == 0.0) return 0.0;
    for (std::size_t j = 0; j < data.d; ++j) v[j] = w[j] / next;
    if (std::fabs(next - lambda) <= 1e-12 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return 2.0 * lambda;
}

namespace {

void require_index(std::size_t i, std::size_t m) {
  if (i >= m)
    throw std::out_of_range("sample index " + std::to_string(i) +
                            " out of range [0, " + std::to_string(m) + ")");
}

Vector unit_gaussian(std::size_t n, Rng& rng) {
  Vector x(n);
  double nrm = 0.0;
  do {
    for (auto& v : x) v = rng.gaussian();
    nrm = norm2(x);
  } while (nrm == 0.0);
  for (auto& v : x) v /= nrm;
  return x;
}

}  // namespace

PhaseRetrievalProblem::PhaseRetrievalProblem(
    std::shared_ptr<const MeasurementData> data, Regularizer r)
    : Problem(std::move(r)), data_(std::move(data)) {
  if (!data_) throw std::invalid_argument("phase retrieval: null data");
}

double PhaseRetrievalProblem::sample_loss(std::span<const double> x,
                                          std::size_t i) const {
  require_index(i, data_->m);
  const double z = dot(data_->row(i), x);
  return std::fabs(z * z - data_->b[i] * data_->b[i]);
}

void PhaseRetrievalProblem::add_sample_subgradient(std::span<const double> x,
                                                   std::size_t i,
                                                   std::span<double> acc) const {
  const auto a = data_->row(i);
  const double z = dot(a, x);
  const double res = z * z - data_->b[i] * data_->b[i];
  if (res == 0.0) return;
  const double s = res > 0.0 ? 1.0 : -1.0;
  axpy(2.0 * s * z, a, acc);
}

Vector PhaseRetrievalProblem::initial_point(Rng& rng) const {
  return unit_gaussian(dim(), rng);
}

SmoothPhaseProblem::SmoothPhaseProblem(
    std::shared_ptr<const MeasurementData> data, Regularizer r)
    : Problem(std::move(r)), data_(std::move(data)) {
  if (!data_) throw std::invalid_argument("smooth synthetic: null data");
}

double SmoothPhaseProblem::sample_loss(std::span<const double> x,
                                       std::size_t i) const {
  require_index(i, data_->m);
  const double z = dot(data_->row(i), x);
  const double res = z * z - data_->b[i] * data_->b[i];
  return res * res;
}

void SmoothPhaseProblem::add_sample_subgradient(std::span<const double> x,
                                                std::size_t i,
                                                std::span<double> acc) const {
  const auto a = data_->row(i);
  const double z = dot(a, x);
  const double res = z * z - data_->b[i] * data_->b[i];
  axpy(4.0 * res * z, a, acc);
}

Vector SmoothPhaseProblem::initial_point(Rng& rng) const {
  return unit_gaussian(dim(), rng);
}

// ---------------------------------------------------------------------------
// Sparse BLR

std::shared_ptr<const BlrData> generate_blr_synthetic(std::size_t m,
                                                      std::size_t s,
                                                      std::size_t t,
                                                      std::size_t classes,
                                                      std::size_t rank,
                                                      std::uint64_t seed,
                                                      double noise_std) {
  if (m < 1 || s < 1 || t < 1 || rank < 1)
    throw std::invalid_argument("blr: dimensions must be >= 1");
  if (classes < 2) throw std::invalid_argument("blr: need at least 2 classes");
  if (!(noise_std >= 0.0))
    throw std::invalid_argument("blr: noise_std must be >= 0");
  constexpr double kTemplateNorm = 4.0;

  Rng rng(derive_seed(seed, streams::kInstance));
  auto data = std::make_shared<BlrData>();
  data->m = m;
  data->s = s;
  data->t = t;
  data->classes = classes;
  data->rank = rank;

  const std::size_t ps = rank * s, tp = t * rank;
  const std::size_t n = classes * (ps + tp + 1);
  data->planted.assign(n, 0.0);

  std::vector<Vector> templates(classes, Vector(s * t, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    Vector u(rank * s), v(rank * t);
    for (auto& e : u) e = rng.gaussian();
    for (auto& e : v) e = rng.gaussian();
    auto& T = templates[c];
    for (std::size_t r = 0; r < rank; ++r)
      for (std::size_t l = 0; l < s; ++l)
        for (std::size_t q = 0; q < t; ++q)
          T[l * t + q] += u[r * s + l] * v[r * t + q];
    const double scale = kTemplateNorm / norm2(T);
    for (auto& e : T) e *= scale;
    // T = sum_r (sqrt(scale) u_r)(sqrt(scale) v_r)^T = (V U)^T with
    // U rows u_r and V columns v_r.
    const double root = std::sqrt(scale);
    double* U = data->planted.data() + c * ps;
    double* V = data->planted.data() + classes * ps + c * tp;
    for (std::size_t r = 0; r < rank; ++r) {
      for (std::size_t l = 0; l < s; ++l) U[r * s + l] = root * u[r * s + l];
      for (std::size_t q = 0; q < t; ++q) V[q * rank + r] = root * v[r * t + q];
    }
    data->planted[classes * (ps + tp) + c] = -0.5 * kTemplateNorm * kTemplateNorm;
  }

  data->labels.resize(m);
  data->x.resize(m * s * t);
  for (std::size_t i = 0; i < m; ++i) {
    const auto y = static_cast<int>(rng.below(classes));
    data->labels[i] = y;
    const auto& T = templates[static_cast<std::size_t>(y)];
    double* X = data->x.data() + i * s * t;
    for (std::size_t e = 0; e < s * t; ++e)
      X[e] = T[e] + noise_std * rng.gaussian();
  }
  return data;
}

SparseBlrProblem::SparseBlrProblem(std::shared_ptr<const BlrData> data,
                                   double lambda)
    : Problem(Regularizer::l1(lambda)), data_(std::move(data)) {
  if (!data_) throw std::invalid_argument("blr: null data");
  for (int y : data_->labels)
    if (y < 0 || static_cast<std::size_t>(y) >= data_->classes)
      throw std::invalid_argument("blr: label out of range");
}

std::size_t SparseBlrProblem::dim() const {
  const auto& D = *data_;
  return D.classes * (D.rank * D.s + D.t * D.rank + 1);
}

std::size_t SparseBlrProblem::u_offset(std::size_t j) const {
  return j * data_->rank * data_->s;
}

std::size_t SparseBlrProblem::v_offset(std::size_t j) const {
  return data_->classes * data_->rank * data_->s + j * data_->t * data_->rank;
}

std::size_t SparseBlrProblem::b_offset() const {
  return data_->classes * (data_->rank * data_->s + data_->t * data_->rank);
}

Vector SparseBlrProblem::scores(std::span<const double> x,
                                std::size_t i) const {
  check_dim(x);
  require_index(i, data_->m);
  const auto& D = *data_;
  const auto X = D.sample(i);
  const std::size_t p = D.rank, s = D.s, t = D.t;
  Vector out(D.classes);
  Vector W(p * t);
  for (std::size_t j = 0; j < D.classes; ++j) {
    const double* U = x.data() + u_offset(j);
    const double* V = x.data() + v_offset(j);
    // W = U X (p x t); score = sum_{a,c} W[a,c] V[c,a].
    std::fill(W.begin(), W.end(), 0.0);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t l = 0; l < s; ++l) {
        const double u = U[a * s + l];
        for (std::size_t c = 0; c < t; ++c) W[a * t + c] += u * X[l * t + c];
      }
    double tr = 0.0;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t c = 0; c < t; ++c) tr += W[a * t + c] * V[c * p + a];
    out[j] = tr + x[b_offset() + j];
  }
  return out;
}

namespace {

double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

double SparseBlrProblem::sample_loss(std::span<const double> x,
                                     std::size_t i) const {
  const Vector z = scores(x, i);
  return log_sum_exp(z) - z[static_cast<std::size_t>(data_->labels[i])];
}

void SparseBlrProblem::add_sample_subgradient(std::span<const double> x,
                                              std::size_t i,
                                              std::span<double> acc) const {
  const auto& D = *data_;
  const Vector z = scores(x, i);
  const double lse = log_sum_exp(z);
  const auto X = D.sample(i);
  const std::size_t p = D.rank, s = D.s, t = D.t;
  const auto y = static_cast<std::size_t>(D.labels[i]);
  Vector W(p * t), XV(s * p);
  for (std::size_t j = 0; j < D.classes; ++j) {
    const double w = std::exp(z[j] - lse) - (j == y ? 1.0 : 0.0);
    if (w == 0.0) continue;
    const double* U = x.data() + u_offset(j);
    const double* V = x.data() + v_offset(j);
    std::fill(W.begin(), W.end(), 0.0);
    std::fill(XV.begin(), XV.end(), 0.0);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t l = 0; l < s; ++l) {
        const double u = U[a * s + l];
        for (std::size_t c = 0; c < t; ++c) W[a * t + c] += u * X[l * t + c];
      }
    for (std::size_t l = 0; l < s; ++l)
      for (std::size_t c = 0; c < t; ++c) {
        const double xv = X[l * t + c];
        for (std::size_t a = 0; a < p; ++a) XV[l * p + a] += xv * V[c * p + a];
      }
    // d score / dU[a,l] = (X V)[l,a];  d score / dV[c,a] = (U X)[a,c].
    double* gU = acc.data() + u_offset(j);
    double* gV = acc.data() + v_offset(j);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t l = 0; l < s; ++l) gU[a * s + l] += w * XV[l * p + a];
    for (std::size_t c = 0; c < t; ++c)
      for (std::size_t a = 0; a < p; ++a) gV[c * p + a] += w * W[a * t + c];
    acc[b_offset() + j] += w;
  }
}

Vector SparseBlrProblem::initial_point(Rng& rng) const {
  Vector x(dim());
  for (auto& v : x) v = 0.1 * rng.gaussian();
  return x;
}

double SparseBlrProblem::accuracy(std::span<const double> x) const {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data_->m; ++i) {
    const Vector z = scores(x, i);
    const auto best = static_cast<std::size_t>(
        std::max_element(z.begin(), z.end()) - z.begin());
    if (best == static_cast<std::size_t>(data_->labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data_->m);
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(Vector diag, Vector center, Regularizer r,
                                   std::size_t samples)
    : Problem(std::move(r)),
      diag_(std::move(diag)),
      center_(std::move(center)),
      samples_(samples) {
  if (diag_.empty()) throw std::invalid_argument("quadratic: empty diagonal");
  if (center_.empty()) center_.assign(diag_.size(), 0.0);
  if (center_.size() != diag_.size())
    throw std::invalid_argument("quadratic: center dimension mismatch");
  for (double d : diag_)
    if (!(d > 0.0))
      throw std::invalid_argument("quadratic: diagonal entries must be > 0");
  if (samples_ < 1) throw std::invalid_argument("quadratic: samples >= 1");
}

double QuadraticProblem::sample_loss(std::span<const double> x,
                                     std::size_t i) const {
  require_index(i, samples_);
  double s = 0.0;
  for (std::size_t j = 0; j < diag_.size(); ++j) {
    const double e = x[j] - center_[j];
    s += diag_[j] * e * e;
  }
  return 0.5 * s;
}

void QuadraticProblem::add_sample_subgradient(std::span<const double> x,
                                              std::size_t,
                                              std::span<double> acc) const {
  for (std::size_t j = 0; j < diag_.size(); ++j)
    acc[j] += diag_[j] * (x[j] - center_[j]);
}

}  // namespace ipsg
