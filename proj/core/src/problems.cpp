#include "critgrad/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace critgrad {

namespace {

void check_shape(const Dataset& data) {
  if (data.samples() == 0 || data.dimension() == 0) {
    throw std::invalid_argument("dataset: empty design matrix");
  }
  if (data.labels.size() != data.samples()) {
    throw std::invalid_argument("dataset: label count does not match sample count");
  }
  if (data.samples() > kMaxSamples || data.dimension() > kMaxFeatures) {
    throw std::invalid_argument("dataset: exceeds desk-scale limits (n <= 1e5, d <= 1e3)");
  }
}

void check_theta(const Problem& p, const Vector& theta) {
  if (theta.size() != p.dimension()) {
    throw std::invalid_argument(std::string(p.kind()) + ": parameter dimension mismatch");
  }
}

// log(1 + exp(-z)) without overflow.
double log1p_exp_neg(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

// 1 / (1 + exp(z))
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double row_dot(const Matrix& x, std::size_t r, const Vector& theta) {
  auto row = x.row(r);
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * theta[j];
  return acc;
}

void add_row(Vector& out, const Matrix& x, std::size_t r, double scale) {
  auto row = x.row(r);
  for (std::size_t j = 0; j < row.size(); ++j) out[j] += scale * row[j];
}

}  // namespace

// ---------------------------------------------------------------- Problem

Problem::Problem(double mu, double smoothness) : mu_(mu), smoothness_(smoothness) {
  if (!(mu > 0.0) || !(smoothness >= mu) || !std::isfinite(smoothness)) {
    throw std::invalid_argument("problem: requires 0 < mu <= L");
  }
}

Vector Problem::batch_gradient(const Vector&, std::span<const std::size_t>) const {
  throw std::invalid_argument(std::string(kind()) + ": objective is not a finite sum");
}

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(Matrix hessian, Vector theta_star, double mu,
                                   double smoothness)
    : Problem(mu, smoothness), hessian_(std::move(hessian)) {
  if (!hessian_.square() || hessian_.rows() != theta_star.size()) {
    throw std::invalid_argument("quadratic: Hessian shape does not match theta_star");
  }
  theta_star_ = std::move(theta_star);
  optimal_loss_ = 0.0;
}

double QuadraticProblem::loss(const Vector& theta) const {
  check_theta(*this, theta);
  const Vector r = theta - *theta_star_;
  return 0.5 * r.dot(hessian_.apply(r));
}

Vector QuadraticProblem::gradient(const Vector& theta) const {
  check_theta(*this, theta);
  return hessian_.apply(theta - *theta_star_);
}

std::shared_ptr<const QuadraticProblem> make_quadratic(std::span<const double> eigs,
                                                       const Vector& theta_star, bool rotate,
                                                       std::uint64_t seed) {
  if (eigs.empty()) throw std::invalid_argument("make_quadratic: empty spectrum");
  if (eigs.size() != theta_star.size()) {
    throw std::invalid_argument("make_quadratic: spectrum and theta_star dimensions differ");
  }
  for (double e : eigs) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("make_quadratic: eigenvalues must be positive");
    }
  }
  const std::size_t d = eigs.size();
  const auto [lo, hi] = std::minmax_element(eigs.begin(), eigs.end());

  if (!rotate) {
    return std::make_shared<const QuadraticProblem>(Matrix::diagonal(eigs), theta_star, *lo, *hi);
  }

  // Random orthogonal Q by modified Gram-Schmidt on a Gaussian matrix; the
  // columns of q are the eigenvectors.
  RandomState rng(seed);
  Matrix q(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) q(i, j) = rng.standard_normal();
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
  }
  Matrix h(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += q(i, k) * eigs[k] * q(j, k);
      h(i, j) = h(j, i) = acc;
    }
  return std::make_shared<const QuadraticProblem>(std::move(h), theta_star, *lo, *hi);
}

// ---------------------------------------------------------------- ridge

RidgeProblem::RidgeProblem(Dataset data, double lambda)
    : Problem(1.0, 1.0), data_(std::move(data)), lambda_(lambda) {
  check_shape(data_);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("ridge: lambda must be nonnegative");
  }
  const double n = static_cast<double>(data_.samples());
  const std::size_t d = data_.dimension();

  Matrix system = gram(data_.features);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) system(i, j) /= n;
  for (std::size_t i = 0; i < d; ++i) system(i, i) += lambda;

  const auto eig = symmetric_eigenvalues(system);
  mu_ = eig.front();
  smoothness_ = eig.back();
  if (!(mu_ > 1e-12 * std::max(1.0, smoothness_))) {
    throw std::invalid_argument("ridge: singular normal equations (lambda = 0 and XᵀX rank deficient)");
  }

  auto rhs = data_.features.apply_transpose(Vector(data_.labels));
  rhs *= 1.0 / n;
  try {
    theta_star_ = solve_spd(system, rhs);
  } catch (const std::domain_error&) {
    throw std::invalid_argument("ridge: singular normal equations");
  }
  optimal_loss_ = loss(*theta_star_);
}

double RidgeProblem::loss(const Vector& theta) const {
  check_theta(*this, theta);
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.samples(); ++i) {
    const double r = row_dot(data_.features, i, theta) - data_.labels[i];
    acc += r * r;
  }
  return acc / (2.0 * static_cast<double>(data_.samples())) + 0.5 * lambda_ * theta.squared_norm();
}

Vector RidgeProblem::gradient(const Vector& theta) const {
  check_theta(*this, theta);
  auto g = Vector::zeros(dimension());
  for (std::size_t i = 0; i < data_.samples(); ++i) {
    add_row(g, data_.features, i, row_dot(data_.features, i, theta) - data_.labels[i]);
  }
  g *= 1.0 / static_cast<double>(data_.samples());
  return g.axpy(lambda_, theta);
}

Vector RidgeProblem::batch_gradient(const Vector& theta, std::span<const std::size_t> rows) const {
  check_theta(*this, theta);
  if (rows.empty()) throw std::invalid_argument("ridge: empty batch");
  auto g = Vector::zeros(dimension());
  for (std::size_t i : rows) {
    add_row(g, data_.features, i, row_dot(data_.features, i, theta) - data_.labels[i]);
  }
  g *= 1.0 / static_cast<double>(rows.size());
  return g.axpy(lambda_, theta);
}

std::shared_ptr<const RidgeProblem> make_ridge(Dataset data, double lambda) {
  return std::make_shared<const RidgeProblem>(std::move(data), lambda);
}

// ---------------------------------------------------------------- logistic

LogisticProblem::LogisticProblem(Dataset data, double lambda)
    : Problem(1.0, 1.0), data_(std::move(data)), lambda_(lambda) {
  check_shape(data_);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("logreg: lambda must be positive");
  }
  for (double y : data_.labels) {
    if (y != 1.0 && y != -1.0) throw std::invalid_argument("logreg: labels must be +1 or -1");
  }
  const double sigma_max = spectral_norm(data_.features);
  mu_ = lambda;
  smoothness_ = lambda + sigma_max * sigma_max / (4.0 * static_cast<double>(data_.samples()));
}

double LogisticProblem::loss(const Vector& theta) const {
  check_theta(*this, theta);
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.samples(); ++i) {
    acc += log1p_exp_neg(data_.labels[i] * row_dot(data_.features, i, theta));
  }
  return acc / static_cast<double>(data_.samples()) + 0.5 * lambda_ * theta.squared_norm();
}

Vector LogisticProblem::gradient(const Vector& theta) const {
  check_theta(*this, theta);
  auto g = Vector::zeros(dimension());
  for (std::size_t i = 0; i < data_.samples(); ++i) {
    const double y = data_.labels[i];
    add_row(g, data_.features, i, -y * sigmoid_neg(y * row_dot(data_.features, i, theta)));
  }
  g *= 1.0 / static_cast<double>(data_.samples());
  return g.axpy(lambda_, theta);
}

Vector LogisticProblem::batch_gradient(const Vector& theta,
                                       std::span<const std::size_t> rows) const {
  check_theta(*this, theta);
  if (rows.empty()) throw std::invalid_argument("logreg: empty batch");
  auto g = Vector::zeros(dimension());
  for (std::size_t i : rows) {
    const double y = data_.labels[i];
    add_row(g, data_.features, i, -y * sigmoid_neg(y * row_dot(data_.features, i, theta)));
  }
  g *= 1.0 / static_cast<double>(rows.size());
  return g.axpy(lambda_, theta);
}

std::shared_ptr<const LogisticProblem> make_logreg(Dataset data, double lambda) {
  return std::make_shared<const LogisticProblem>(std::move(data), lambda);
}

// ---------------------------------------------------------------- reference optimum

Reference solve_reference(const Problem& problem, std::size_t max_iterations,
                          double gradient_tolerance) {
  if (problem.theta_star()) {
    const Vector& star = *problem.theta_star();
    return {star, problem.loss(star), problem.gradient(star).norm(), 0};
  }
  const double step = 1.0 / problem.smoothness();
  auto theta = Vector::zeros(problem.dimension());
  auto g = problem.gradient(theta);
  std::size_t it = 0;
  for (; it < max_iterations && g.norm() >= gradient_tolerance; ++it) {
    theta.axpy(-step, g);
    g = problem.gradient(theta);
  }
  return {theta, problem.loss(theta), g.norm(), it};
}

// ---------------------------------------------------------------- oracles

GradientOracle::GradientOracle(Kind kind, double sigma, std::size_t batch_size, RandomState rng)
    : kind_(kind), sigma_(sigma), batch_size_(batch_size), rng_(rng) {}

GradientOracle GradientOracle::additive_gaussian(double sigma, RandomState rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("oracle: sigma must be nonnegative");
  }
  return GradientOracle(Kind::AdditiveGaussian, sigma, 0, rng);
}

GradientOracle GradientOracle::minibatch(std::size_t batch_size, RandomState rng) {
  if (batch_size == 0) throw std::invalid_argument("oracle: batch size must be positive");
  return GradientOracle(Kind::Minibatch, 0.0, batch_size, rng);
}

GradientOracle::Sample GradientOracle::sample_with_noise(const Problem& problem,
                                                         const Vector& theta) {
  if (kind_ == Kind::AdditiveGaussian) {
    Vector noise = gaussian(rng_, problem.dimension(), sigma_);
    Vector g = problem.gradient(theta);
    g += noise;
    return {std::move(g), std::move(noise)};
  }
  Vector g = sample(problem, theta);
  Vector noise = g - problem.gradient(theta);
  return {std::move(g), std::move(noise)};
}

Vector GradientOracle::sample(const Problem& problem, const Vector& theta) {
  if (kind_ == Kind::AdditiveGaussian) return sample_with_noise(problem, theta).gradient;

  const std::size_t n = problem.sample_count();
  if (n == 0) throw std::invalid_argument("oracle: minibatch sampling needs a finite-sum problem");
  if (batch_size_ > n) throw std::invalid_argument("oracle: batch size exceeds sample count");
  // Without replacement (partial Fisher-Yates over a persistent permutation).
  if (perm_.size() != n) {
    perm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  }
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::swap(perm_[i], perm_[i + rng_.uniform_index(n - i)]);
  }
  rows_.assign(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(batch_size_));
  return problem.batch_gradient(theta, rows_);
}

Vector stochastic_gradient(const Problem& problem, const Vector& theta, GradientOracle& oracle) {
  return oracle.sample(problem, theta);
}

double finite_diff_check(const Problem& problem, const Vector& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  const Vector g = problem.gradient(theta);
  double worst = 0.0;
  Vector probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = problem.loss(probe);
    probe[i] = theta[i] - h;
    const double down = problem.loss(probe);
    probe[i] = theta[i];
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(g[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return worst;
}

}  // namespace critgrad
