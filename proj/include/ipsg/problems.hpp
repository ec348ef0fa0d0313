#ifndef IPSG_PROBLEMS_HPP
#define IPSG_PROBLEMS_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ipsg/linalg.hpp"
#include "ipsg/prox.hpp"
#include "ipsg/random.hpp"

namespace ipsg {

/// Finite-sum stochastic objective phi(x) = F(x) + r(x) with
/// F(x) = (1/m) sum_i f(x; i).
///
/// Instances are immutable after construction, so every method may be
/// called concurrently from worker threads.
class Problem {
 public:
  explicit Problem(Regularizer r) : regularizer_(std::move(r)) {}
  virtual ~Problem() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_samples() const = 0;
  virtual bool is_smooth() const = 0;

  /// f(x; i).
  virtual double sample_loss(std::span<const double> x,
                             std::size_t i) const = 0;
  /// acc += an element of the subdifferential of f(.; i) at x.
  virtual void add_sample_subgradient(std::span<const double> x, std::size_t i,
                                      std::span<double> acc) const = 0;

  /// Default starting point for runs that do not supply one.
  virtual Vector initial_point(Rng& rng) const;

  const Regularizer& regularizer() const { return regularizer_; }

  /// Average of the sample subgradients over the batch.
  /// Throws on an empty batch, out-of-range index or wrong dimension.
  Vector sample_subgradient(std::span<const double> x,
                            std::span<const std::size_t> batch) const;
  /// Subgradient of F over all m samples.
  Vector full_subgradient(std::span<const double> x) const;
  /// F(x).
  double data_loss(std::span<const double> x) const;
  /// F(x) + r(x); kInfeasible outside dom(r).
  double full_objective(std::span<const double> x) const;

 protected:
  void check_dim(std::span<const double> x) const;

 private:
  Regularizer regularizer_;
};

// ---------------------------------------------------------------------------
// Phase retrieval

/// Gaussian measurements a_i (rows of A) with magnitudes b_i = |<a_i, x*>|.
struct MeasurementData {
  std::size_t m = 0;
  std::size_t d = 0;
  Vector a;  // m x d, row-major
  Vector b;
  Vector x_star;

  std::span<const double> row(std::size_t i) const {
    return {a.data() + i * d, d};
  }
};

/// Ground truth drawn uniformly on the unit sphere when none is provided.
std::shared_ptr<const MeasurementData> generate_phase_retrieval(
    std::size_t m, std::size_t d, std::uint64_t seed,
    std::optional<Vector> ground_truth = std::nullopt);

/// Weak-convexity constant 2 * lambda_max(A^T A / m) of the robust
/// phase-retrieval loss, estimated by power iteration.
double phase_retrieval_rho(const MeasurementData& data);

/// f(x; i) = | <a_i, x>^2 - b_i^2 |. Subgradient sign is 0 at the kink.
class PhaseRetrievalProblem : public Problem {
 public:
  explicit PhaseRetrievalProblem(std::shared_ptr<const MeasurementData> data,
                                 Regularizer r = Regularizer::zero());

  std::string_view kind() const override { return "phase_retrieval"; }
  std::size_t dim() const override { return data_->d; }
  std::size_t num_samples() const override { return data_->m; }
  bool is_smooth() const override { return false; }
  double sample_loss(std::span<const double> x, std::size_t i) const override;
  void add_sample_subgradient(std::span<const double> x, std::size_t i,
                              std::span<double> acc) const override;
  /// Gaussian direction scaled to unit norm.
  Vector initial_point(Rng& rng) const override;

  const MeasurementData& data() const { return *data_; }
  std::shared_ptr<const MeasurementData> shared_data() const { return data_; }

 private:
  std::shared_ptr<const MeasurementData> data_;
};

/// Smooth counterpart f(x; i) = (<a_i, x>^2 - b_i^2)^2 on the same data.
class SmoothPhaseProblem : public Problem {
 public:
  explicit SmoothPhaseProblem(std::shared_ptr<const MeasurementData> data,
                              Regularizer r = Regularizer::zero());

  std::string_view kind() const override { return "smooth_synthetic"; }
  std::size_t dim() const override { return data_->d; }
  std::size_t num_samples() const override { return data_->m; }
  bool is_smooth() const override { return true; }
  double sample_loss(std::span<const double> x, std::size_t i) const override;
  void add_sample_subgradient(std::span<const double> x, std::size_t i,
                              std::span<double> acc) const override;
  Vector initial_point(Rng& rng) const override;

  const MeasurementData& data() const { return *data_; }
  std::shared_ptr<const MeasurementData> shared_data() const { return data_; }

 private:
  std::shared_ptr<const MeasurementData> data_;
};

// ---------------------------------------------------------------------------
// Sparse bilinear logistic regression

/// Samples X_i (s x t, row-major) with labels in {0..C-1}, plus the
/// parameters the generator planted.
struct BlrData {
  std::size_t m = 0, s = 0, t = 0, classes = 0, rank = 0;
  Vector x;                    // m * s * t
  std::vector<int> labels;     // 0-based
  Vector planted;              // layout of SparseBlrProblem

  std::span<const double> sample(std::size_t i) const {
    return {x.data() + i * s * t, s * t};
  }
};

/// Class templates are random rank-p matrices of Frobenius norm 4; each
/// sample is its class template plus i.i.d. N(0, noise_std^2) entries.
/// The planted parameters score a sample by <X, T_c> - ||T_c||^2 / 2.
std::shared_ptr<const BlrData> generate_blr_synthetic(std::size_t m,
                                                      std::size_t s,
                                                      std::size_t t,
                                                      std::size_t classes,
                                                      std::size_t rank,
                                                      std::uint64_t seed,
                                                      double noise_std = 0.5);

/// Softmax cross-entropy of the scores tr(U_j X V_j) + b_j with an l1
/// penalty handled by the regularizer.
///
/// Variable layout: U_1..U_C (each p x s, row-major), then V_1..V_C (each
/// t x p, row-major), then b (C entries).
class SparseBlrProblem : public Problem {
 public:
  SparseBlrProblem(std::shared_ptr<const BlrData> data, double lambda);

  std::string_view kind() const override { return "sparse_blr"; }
  std::size_t dim() const override;
  std::size_t num_samples() const override { return data_->m; }
  bool is_smooth() const override { return true; }
  double sample_loss(std::span<const double> x, std::size_t i) const override;
  void add_sample_subgradient(std::span<const double> x, std::size_t i,
                              std::span<double> acc) const override;
  /// N(0, 0.1^2) entries; zero is a saddle of the bilinear scores.
  Vector initial_point(Rng& rng) const override;

  /// Class scores tr(U_j X_i V_j) + b_j for sample i.
  Vector scores(std::span<const double> x, std::size_t i) const;
  /// Fraction of samples whose highest score is the true class.
  double accuracy(std::span<const double> x) const;

  std::size_t u_offset(std::size_t j) const;
  std::size_t v_offset(std::size_t j) const;
  std::size_t b_offset() const;

  const BlrData& data() const { return *data_; }
  std::shared_ptr<const BlrData> shared_data() const { return data_; }
  double lambda() const { return regularizer().lambda; }

 private:
  std::shared_ptr<const BlrData> data_;
};

// ---------------------------------------------------------------------------
// Quadratic

/// F(x) = 1/2 (x - c)^T D (x - c) with D diagonal positive; every sample
/// returns the same function so minibatching is exercised without noise.
class QuadraticProblem : public Problem {
 public:
  QuadraticProblem(Vector diag, Vector center,
                   Regularizer r = Regularizer::zero(),
                   std::size_t samples = 1);

  std::string_view kind() const override { return "quadratic"; }
  std::size_t dim() const override { return diag_.size(); }
  std::size_t num_samples() const override { return samples_; }
  bool is_smooth() const override { return true; }
  double sample_loss(std::span<const double> x, std::size_t i) const override;
  void add_sample_subgradient(std::span<const double> x, std::size_t i,
                              std::span<double> acc) const override;

  const Vector& diag() const { return diag_; }
  const Vector& center() const { return center_; }

 private:
  Vector diag_;
  Vector center_;
  std::size_t samples_;
};

}  // namespace ipsg

#endif  // IPSG_PROBLEMS_HPP
