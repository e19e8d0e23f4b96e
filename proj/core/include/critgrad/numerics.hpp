#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace critgrad {

/// Dense real vector. Constructors reject empty input and non-finite entries;
/// arithmetic afterwards is unchecked so that a diverging run can still be
/// observed rather than aborted.
class Vector {
 public:
  explicit Vector(std::vector<double> values);
  Vector(std::initializer_list<double> values);

  static Vector zeros(std::size_t dim);
  static Vector filled(std::size_t dim, double value);

  std::size_t size() const noexcept { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  Vector& operator+=(const Vector& other);
  Vector& operator-=(const Vector& other);
  Vector& operator*=(double s) noexcept;

  /// this += s * other
  Vector& axpy(double s, const Vector& other);

  double dot(const Vector& other) const;
  double norm() const noexcept;
  double squared_norm() const noexcept;

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  Vector() = default;
  std::vector<double> data_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);

/// Throws std::invalid_argument naming `what` when the dimensions differ.
void require_same_dimension(const Vector& a, const Vector& b, const char* what);

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Matrix transpose() const;
  Vector apply(const Vector& x) const;
  /// xᵀ A  (equivalently Aᵀ x)
  Vector apply_transpose(const Vector& x) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);

/// AᵀA without forming the transpose explicitly.
Matrix gram(const Matrix& a);

/// All eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Throws std::invalid_argument for non-square input or asymmetry > 1e-12
/// (relative to the largest entry).
std::vector<double> symmetric_eigenvalues(const Matrix& m);

double symmetric_max_eigenvalue(const Matrix& m);
double symmetric_min_eigenvalue(const Matrix& m);

/// Largest singular value, sqrt(λ_max(AᵀA)).
double spectral_norm(const Matrix& a);

/// Solve (symmetric positive definite) A x = b by Cholesky.
/// Throws std::domain_error when A is not numerically positive definite.
Vector solve_spd(const Matrix& a, const Vector& b);

/// Companion matrix of z^K - c_0 z^{K-1} - ... - c_{K-1}: first row holds the
/// coefficients, the sub-diagonal holds ones (a shift register).
Matrix companion_matrix(std::span<const double> coeffs);

/// Eigenvalues of a general real square matrix (balancing, Hessenberg
/// reduction, Francis double-shift QR). Order is unspecified.
std::vector<std::complex<double>> eigenvalues(const Matrix& m);

/// Largest root modulus of z^K - c_0 z^{K-1} - ... - c_{K-1}.
double companion_spectral_radius(std::span<const double> coeffs);

}  // namespace critgrad
