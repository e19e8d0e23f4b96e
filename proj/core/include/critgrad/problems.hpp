#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "critgrad/numerics.hpp"
#include "critgrad/random.hpp"

namespace critgrad {

inline constexpr std::size_t kMaxSamples = 100'000;
inline constexpr std::size_t kMaxFeatures = 1'000;

/// Labelled design matrix. Classification labels are ±1.
struct Dataset {
  Matrix features;
  std::vector<double> labels;
  std::uint64_t seed = 0;
  double flip_prob = 0.0;

  std::size_t samples() const noexcept { return features.rows(); }
  std::size_t dimension() const noexcept { return features.cols(); }
};

/// Two unit-variance Gaussian clusters whose means are `class_sep` apart along
/// the all-ones direction; each label is flipped independently with
/// probability `flip_prob`. One uniform is drawn per sample for the flip
/// decision whatever `flip_prob` is, so changing it leaves features intact.
Dataset synth_classification(std::size_t n, std::size_t d, double class_sep, double flip_prob,
                             std::uint64_t seed);

/// Plain comma-delimited text: header `x0,x1,...,x{d-1},y`, then one sample
/// per line (features, then label), '.' decimal, 17 significant digits.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Differentiable objective with known curvature bounds: every Hessian
/// eigenvalue lies in [mu, smoothness].
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string_view kind() const noexcept = 0;
  virtual std::size_t dimension() const noexcept = 0;
  virtual double loss(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;

  /// Number of component functions for minibatch sampling; 0 when the
  /// objective is not a finite sum.
  virtual std::size_t sample_count() const noexcept { return 0; }
  /// Mean gradient of the selected components (repeats allowed).
  virtual Vector batch_gradient(const Vector& theta, std::span<const std::size_t> rows) const;

  double mu() const noexcept { return mu_; }
  double smoothness() const noexcept { return smoothness_; }
  const std::optional<Vector>& theta_star() const noexcept { return theta_star_; }
  std::optional<double> optimal_loss() const noexcept { return optimal_loss_; }

 protected:
  Problem(double mu, double smoothness);

  double mu_;
  double smoothness_;
  std::optional<Vector> theta_star_;
  std::optional<double> optimal_loss_;
};

/// f(θ) = ½ (θ-θ*)ᵀ H (θ-θ*).
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Matrix hessian, Vector theta_star, double mu, double smoothness);

  std::string_view kind() const noexcept override { return "quadratic"; }
  std::size_t dimension() const noexcept override { return hessian_.rows(); }
  double loss(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;

  const Matrix& hessian() const noexcept { return hessian_; }

 private:
  Matrix hessian_;
};

/// F(θ) = (1/2n)‖Xθ - y‖² + (λ/2)‖θ‖².
class RidgeProblem final : public Problem {
 public:
  RidgeProblem(Dataset data, double lambda);

  std::string_view kind() const noexcept override { return "ridge"; }
  std::size_t dimension() const noexcept override { return data_.dimension(); }
  double loss(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  std::size_t sample_count() const noexcept override { return data_.samples(); }
  Vector batch_gradient(const Vector& theta, std::span<const std::size_t> rows) const override;

  const Dataset& data() const noexcept { return data_; }
  double lambda() const noexcept { return lambda_; }

 private:
  Dataset data_;
  double lambda_;
};

/// F(θ) = (1/n) Σ log(1 + exp(-y_i x_iᵀθ)) + (λ/2)‖θ‖². No closed-form
/// minimizer; see solve_reference().
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(Dataset data, double lambda);

  std::string_view kind() const noexcept override { return "logreg"; }
  std::size_t dimension() const noexcept override { return data_.dimension(); }
  double loss(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  std::size_t sample_count() const noexcept override { return data_.samples(); }
  Vector batch_gradient(const Vector& theta, std::span<const std::size_t> rows) const override;

  const Dataset& data() const noexcept { return data_; }
  double lambda() const noexcept { return lambda_; }

 private:
  Dataset data_;
  double lambda_;
};

/// Quadratic with the given Hessian spectrum, optionally rotated by a random
/// orthogonal matrix drawn from `seed`.
std::shared_ptr<const QuadraticProblem> make_quadratic(std::span<const double> eigs,
                                                       const Vector& theta_star, bool rotate,
                                                       std::uint64_t seed);
std::shared_ptr<const RidgeProblem> make_ridge(Dataset data, double lambda);
std::shared_ptr<const LogisticProblem> make_logreg(Dataset data, double lambda);

/// Numerical optimum from long full-batch gradient descent with step 1/L.
struct Reference {
  Vector theta;
  double loss;
  double gradient_norm;
  std::size_t iterations;
};
Reference solve_reference(const Problem& problem, std::size_t max_iterations = 1'000'000,
                          double gradient_tolerance = 1e-10);

/// Stochastic first-order oracle. Carries its own random stream. Minibatches
/// are drawn without replacement, so batch_size == n gives the full gradient.
class GradientOracle {
 public:
  enum class Kind { AdditiveGaussian, Minibatch };

  struct Sample {
    Vector gradient;
    /// gradient - ∇F(θ). Exact draw for AdditiveGaussian.
    Vector noise;
  };

  static GradientOracle additive_gaussian(double sigma, RandomState rng);
  static GradientOracle minibatch(std::size_t batch_size, RandomState rng);

  Kind kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }
  std::size_t batch_size() const noexcept { return batch_size_; }

  Vector sample(const Problem& problem, const Vector& theta);
  Sample sample_with_noise(const Problem& problem, const Vector& theta);

 private:
  GradientOracle(Kind kind, double sigma, std::size_t batch_size, RandomState rng);

  Kind kind_;
  double sigma_;
  std::size_t batch_size_;
  RandomState rng_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> rows_;
};

Vector stochastic_gradient(const Problem& problem, const Vector& theta, GradientOracle& oracle);

/// Central differences against problem.gradient(). Per coordinate the error
/// is |fd - g| / max(1, |g|, |fd|); returns the maximum over coordinates.
double finite_diff_check(const Problem& problem, const Vector& theta, double h);

}  // namespace critgrad
