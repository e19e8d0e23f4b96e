#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "critgrad/numerics.hpp"
#include "critgrad/optim.hpp"

namespace critgrad {

/// Vertex enumeration visits 2^K points; beyond this K it is rejected.
inline constexpr std::size_t kMaxStaleness = 20;

/// Step size, staleness bound and curvature interval of a rate question.
struct RateQuery {
  double alpha;
  std::size_t K;
  double mu;
  double L;

  /// Throws std::invalid_argument unless alpha > 0, 1 <= K <= 20, 0 < mu <= L.
  void validate() const;
};

/// Lower block of the K×K coefficient matrix. The recursion on stacked
/// iterates needs the shift (sub-diagonal identity); the identity reading
/// (ones on the lower diagonal) is kept for comparison only.
enum class LowerBlock { Shift, Identity };

/// λ_0 = 1 - α η_0 and λ_k = -α w_k η_k. `weights` holds w_1..w_{K-1} and
/// `etas` holds η_0..η_{K-1}.
std::vector<double> lambda_coeffs(double alpha, std::span<const double> weights,
                                  std::span<const double> etas);

/// Coefficient matrix with λ in the first row and the chosen lower block.
Matrix lambda_matrix(std::span<const double> lambda, LowerBlock block = LowerBlock::Shift);

/// A corner of the (w, η) box: η_0 ∈ {μ, L}; for k ≥ 1 either w_k = 0, or
/// w_k = 1 with η_k = L.
struct Vertex {
  double eta0;
  std::vector<int> weights;  // w_1..w_{K-1}, each 0 or 1
};

/// Worst case over the box of the largest singular value of the coefficient
/// matrix. The spectral norm is convex in the entries, so the supremum is
/// attained at a vertex and enumeration is exact.
double rate_sv(const RateQuery& q, LowerBlock block = LowerBlock::Shift,
               Vertex* argmax = nullptr);

/// Max over the same vertices of the companion spectral radius. A heuristic
/// for the supremum: spectral radius is not convex in the entries.
double rate_sr(const RateQuery& q, Vertex* argmax = nullptr);

/// Thrown when the neighbourhood bound is requested with q >= 1.
class BoundInapplicable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// α² K σ² / (1 - q²).
double variance_bound(double alpha, std::size_t K, double q, double sigma2);

struct RateReport {
  RateQuery query;
  double sigma2;
  double q_sv;
  double q_sr;
  double q_sv_identity_block;
  Vertex vertex_sv;
  Vertex vertex_sr;
  /// From q_sv; empty when q_sv >= 1 (no per-step certificate).
  std::optional<double> variance_bound;
  /// Same formula with q_sr; asymptotic and heuristic.
  std::optional<double> variance_bound_sr;

  bool certificate_available() const noexcept { return q_sv < 1.0; }
};

RateReport make_rate_report(const RateQuery& q, double sigma2);

/// JSON document: {alpha, K, mu, L, sigma2, q_sv, q_sr, vertex, variance_bound|null, ...}.
std::string to_json(const RateReport& report);

/// Aggregation weights of one step, keyed by lag (0 = current gradient).
struct LagWeight {
  std::size_t lag;
  double weight;
};

struct WeightSchedule {
  std::vector<std::vector<LagWeight>> steps;

  /// K: one more than the largest lag used anywhere (1 when empty).
  std::size_t staleness() const noexcept;
};

/// Lags and weights recorded by train(); requires RecordOptions::weights.
WeightSchedule schedule_from(const Trajectory& trajectory);
/// Per-step gradient noise recorded by train(); requires RecordOptions::noise.
std::vector<Vector> noise_from(const Trajectory& trajectory);

/// Same weights at every step: weights[k] applies to lag k.
WeightSchedule constant_schedule(std::span<const double> weights, std::size_t steps);

/// r_{t+1} = r_t - α Σ_k w_{t,k} (H r_{t-k} + ζ_{t-k}) for t < T. Returns
/// r_0..r_T. `noise` may be empty (noiseless) or hold at least T vectors.
/// Throws std::invalid_argument when a step references a lag beyond the
/// available history, a weight leaves [0, 1], or lag 0 is missing.
std::vector<Vector> simulate_system(const Matrix& hessian, const WeightSchedule& schedule,
                                    double alpha, const Vector& r0,
                                    std::span<const Vector> noise, std::size_t T);
/// Diagonal Hessian given by its eigenvalues.
std::vector<Vector> simulate_system(std::span<const double> hessian_eigs,
                                    const WeightSchedule& schedule, double alpha,
                                    const Vector& r0, std::span<const Vector> noise,
                                    std::size_t T);

/// exp(slope) of a least-squares line through log(values); zeros are skipped.
double fitted_rate(std::span<const double> values);

}  // namespace critgrad
