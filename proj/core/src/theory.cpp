#include "critgrad/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include <json.hpp>

namespace critgrad {

namespace {

using json = nlohmann::json;

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

/// Coefficients at vertex `bits`: bit 0 picks η_0 (0 → L, 1 → μ), bit k picks w_k.
void vertex_coeffs(const RateQuery& q, std::uint32_t bits, std::vector<double>& lambda) {
  lambda[0] = 1.0 - q.alpha * ((bits & 1u) ? q.mu : q.L);
  for (std::size_t k = 1; k < q.K; ++k) {
    lambda[k] = (bits >> k) & 1u ? -q.alpha * q.L : 0.0;
  }
}

Vertex vertex_of(const RateQuery& q, std::uint32_t bits) {
  Vertex v{(bits & 1u) ? q.mu : q.L, {}};
  for (std::size_t k = 1; k < q.K; ++k) v.weights.push_back(static_cast<int>((bits >> k) & 1u));
  return v;
}

/// ‖Λ‖₂ in closed form. ΛᵀΛ = λλᵀ + D with D a 0/1 diagonal, so the top
/// eigenvalue lives in span{λ restricted to D=1, λ restricted to D=0}.
double lambda_spectral_norm(std::span<const double> lambda, LowerBlock block) {
  const std::size_t K = lambda.size();
  if (K == 1) return std::abs(lambda[0]);
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const bool unit = block == LowerBlock::Shift ? i + 1 < K : i > 0;
    (unit ? a : b) += lambda[i] * lambda[i];
  }
  const double x = 1.0 + a;
  const double half = 0.5 * (x - b);
  const double top = 0.5 * (x + b) + std::sqrt(half * half + a * b);
  return std::sqrt(top);
}

/// Schur-Cohn test: every root of z^K - Σ λ_i z^{K-1-i} has modulus < r.
bool roots_inside(std::span<const double> lambda, double r, std::vector<double>& p,
                  std::vector<double>& q) {
  const std::size_t K = lambda.size();
  // Ascending coefficients of the polynomial in z/r, leading coefficient 1.
  p.assign(K + 1, 0.0);
  p[K] = 1.0;
  double scale = 1.0;
  for (std::size_t i = 0; i < K; ++i) {
    scale /= r;
    p[K - 1 - i] = -lambda[i] * scale;
  }
  for (std::size_t n = K; n >= 1; --n) {
    const double lead = p[n];
    const double tail = p[0];
    if (!(std::abs(tail) < std::abs(lead))) return false;
    q.resize(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = lead * p[i + 1] - tail * p[n - 1 - i];
    std::copy(q.begin(), q.end(), p.begin());
  }
  return true;
}

struct Best {
  double value = -1.0;
  std::uint32_t bits = 0;
};

/// `below(λ, v)` may return true only when eval(λ) < v; such vertices are
/// skipped.
template <class Eval, class Below>
Best enumerate_vertices(const RateQuery& q, Eval eval, Below below) {
  const std::uint32_t count = 1u << q.K;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (count < 4096) workers = 1;
  std::vector<Best> best(workers);
  auto work = [&](unsigned id) {
    std::vector<double> lambda(q.K);
    std::vector<double> scratch;
    std::vector<double> scratch2;
    // Heavy vertices first: the running maximum rises early and prunes more.
    for (std::uint32_t i = id; i < count; i += workers) {
      const std::uint32_t bits = count - 1 - i;
      vertex_coeffs(q, bits, lambda);
      if (best[id].value > 0.0 && below(lambda, best[id].value, scratch, scratch2)) continue;
      const double v = eval(lambda);
      if (v > best[id].value || (v == best[id].value && bits < best[id].bits)) best[id] = {v, bits};
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned id = 0; id < workers; ++id) pool.emplace_back(work, id);
  }
  Best out;
  for (const auto& b : best) {
    if (b.value > out.value || (b.value == out.value && b.bits < out.bits)) out = b;
  }
  return out;
}

json vertex_json(const Vertex& v) { return {{"eta0", v.eta0}, {"weights", v.weights}}; }

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

void RateQuery::validate() const {
  require(std::isfinite(alpha) && alpha > 0.0, "rate query: alpha must be positive");
  require(K >= 1, "rate query: K must be at least 1");
  if (K > kMaxStaleness) {
    throw std::invalid_argument("rate query: K = " + std::to_string(K) +
                                " exceeds the vertex-enumeration limit of " +
                                std::to_string(kMaxStaleness));
  }
  require(std::isfinite(mu) && mu > 0.0, "rate query: mu must be positive");
  require(std::isfinite(L) && mu <= L, "rate query: need mu <= L");
}

std::vector<double> lambda_coeffs(double alpha, std::span<const double> weights,
                                  std::span<const double> etas) {
  require(std::isfinite(alpha) && alpha > 0.0, "lambda_coeffs: alpha must be positive");
  require(!etas.empty(), "lambda_coeffs: need at least eta_0");
  require(weights.size() + 1 == etas.size(), "lambda_coeffs: need K-1 weights for K etas");
  for (double eta : etas) require(std::isfinite(eta) && eta > 0.0, "lambda_coeffs: etas must be positive");
  for (double w : weights) require(w >= 0.0 && w <= 1.0, "lambda_coeffs: weights must lie in [0, 1]");

  std::vector<double> lambda(etas.size());
  lambda[0] = 1.0 - alpha * etas[0];
  for (std::size_t k = 1; k < etas.size(); ++k) lambda[k] = -alpha * weights[k - 1] * etas[k];
  return lambda;
}

Matrix lambda_matrix(std::span<const double> lambda, LowerBlock block) {
  require(!lambda.empty(), "lambda_matrix: empty coefficient list");
  if (block == LowerBlock::Shift) return companion_matrix(lambda);
  const std::size_t K = lambda.size();
  Matrix m(K, K);
  for (std::size_t j = 0; j < K; ++j) m(0, j) = lambda[j];
  for (std::size_t i = 1; i < K; ++i) m(i, i) = 1.0;
  return m;
}

double rate_sv(const RateQuery& q, LowerBlock block, Vertex* argmax) {
  q.validate();
  const Best best = enumerate_vertices(
      q, [block](const std::vector<double>& lambda) { return lambda_spectral_norm(lambda, block); },
      [](const std::vector<double>&, double, std::vector<double>&, std::vector<double>&) {
        return false;
      });
  if (argmax != nullptr) *argmax = vertex_of(q, best.bits);
  return best.value;
}

double rate_sr(const RateQuery& q, Vertex* argmax) {
  q.validate();
  const Best best = enumerate_vertices(
      q, [](const std::vector<double>& lambda) { return companion_spectral_radius(lambda); },
      [](const std::vector<double>& lambda, double v, std::vector<double>& p,
         std::vector<double>& s) { return roots_inside(lambda, v * (1.0 - 1e-12), p, s);
      });
  if (argmax != nullptr) *argmax = vertex_of(q, best.bits);
  return best.value;
}

double variance_bound(double alpha, std::size_t K, double q, double sigma2) {
  require(std::isfinite(alpha) && alpha >= 0.0, "variance_bound: alpha must be nonnegative");
  require(K >= 1, "variance_bound: K must be at least 1");
  require(std::isfinite(sigma2) && sigma2 >= 0.0, "variance_bound: sigma2 must be nonnegative");
  require(q >= 0.0, "variance_bound: q must be nonnegative");
  if (!(q < 1.0)) {
    throw BoundInapplicable("variance bound inapplicable: q = " + std::to_string(q) + " >= 1");
  }
  return alpha * alpha * static_cast<double>(K) * sigma2 / (1.0 - q * q);
}

RateReport make_rate_report(const RateQuery& q, double sigma2) {
  require(std::isfinite(sigma2) && sigma2 >= 0.0, "rate report: sigma2 must be nonnegative");
  RateReport r{q, sigma2, 0.0, 0.0, 0.0, {}, {}, std::nullopt, std::nullopt};
  r.q_sv = rate_sv(q, LowerBlock::Shift, &r.vertex_sv);
  r.q_sr = rate_sr(q, &r.vertex_sr);
  r.q_sv_identity_block = rate_sv(q, LowerBlock::Identity);
  if (r.q_sv < 1.0) r.variance_bound = variance_bound(q.alpha, q.K, r.q_sv, sigma2);
  if (r.q_sr < 1.0) r.variance_bound_sr = variance_bound(q.alpha, q.K, r.q_sr, sigma2);
  return r;
}

std::string to_json(const RateReport& r) {
  json doc{
      {"alpha", r.query.alpha},
      {"K", r.query.K},
      {"mu", r.query.mu},
      {"L", r.query.L},
      {"sigma2", r.sigma2},
      {"q_sv", r.q_sv},
      {"q_sr", r.q_sr},
      {"q_sv_identity_block", r.q_sv_identity_block},
      {"vertex", vertex_json(r.vertex_sv)},
      {"vertex_sr", vertex_json(r.vertex_sr)},
      {"variance_bound", optional_json(r.variance_bound)},
      {"variance_bound_sr", optional_json(r.variance_bound_sr)},
      {"certificate", r.certificate_available() ? "singular-value" : "unavailable"},
  };
  if (!r.certificate_available()) {
    doc["note"] =
        "largest singular value >= 1: no per-step certificate; q_sr is the asymptotic rate "
        "(vertex maximum, heuristic over the box)";
  }
  return doc.dump(2);
}

std::size_t WeightSchedule::staleness() const noexcept {
  std::size_t K = 1;
  for (const auto& step : steps)
    for (const auto& lw : step) K = std::max(K, lw.lag + 1);
  return K;
}

WeightSchedule schedule_from(const Trajectory& trajectory) {
  WeightSchedule s;
  s.steps.reserve(trajectory.steps.size());
  for (const auto& rec : trajectory.steps) {
    if (rec.contributions.empty()) {
      throw std::invalid_argument("schedule_from: trajectory was recorded without weights");
    }
    std::vector<LagWeight> row;
    row.reserve(rec.contributions.size());
    for (const auto& c : rec.contributions) {
      if (c.source_step > rec.step) {
        throw std::invalid_argument("schedule_from: contribution from a future step");
      }
      row.push_back({rec.step - c.source_step, c.weight});
    }
    s.steps.push_back(std::move(row));
  }
  return s;
}

std::vector<Vector> noise_from(const Trajectory& trajectory) {
  std::vector<Vector> out;
  out.reserve(trajectory.steps.size());
  for (const auto& rec : trajectory.steps) {
    if (!rec.noise) throw std::invalid_argument("noise_from: trajectory was recorded without noise");
    out.push_back(*rec.noise);
  }
  return out;
}

WeightSchedule constant_schedule(std::span<const double> weights, std::size_t steps) {
  require(!weights.empty(), "constant_schedule: need the lag-0 weight");
  std::vector<LagWeight> row;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k == 0 || weights[k] != 0.0) row.push_back({k, weights[k]});
  }
  return WeightSchedule{std::vector<std::vector<LagWeight>>(steps, row)};
}

std::vector<Vector> simulate_system(const Matrix& hessian, const WeightSchedule& schedule,
                                    double alpha, const Vector& r0,
                                    std::span<const Vector> noise, std::size_t T) {
  require(hessian.square() && hessian.rows() == r0.size(),
          "simulate_system: Hessian does not match the state dimension");
  require(std::isfinite(alpha) && alpha >= 0.0, "simulate_system: alpha must be nonnegative");
  require(schedule.steps.size() >= T, "simulate_system: schedule shorter than T");
  require(noise.empty() || noise.size() >= T, "simulate_system: noise shorter than T");

  std::vector<Vector> r;
  r.reserve(T + 1);
  r.push_back(r0);
  // Per-step forcing H r_t + ζ_t, reused at every later lag.
  std::vector<Vector> forcing;
  forcing.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Vector f = hessian.apply(r[t]);
    if (!noise.empty()) {
      require_same_dimension(f, noise[t], "simulate_system");
      f += noise[t];
    }
    forcing.push_back(std::move(f));

    bool has_current = false;
    Vector next = r[t];
    for (const auto& [lag, w] : schedule.steps[t]) {
      if (!(w >= 0.0 && w <= 1.0)) {
        throw std::invalid_argument("simulate_system: weight outside [0, 1] at step " +
                                    std::to_string(t));
      }
      if (lag > t) {
        throw std::invalid_argument("simulate_system: step " + std::to_string(t) +
                                    " references lag " + std::to_string(lag) +
                                    " before the start of the history");
      }
      has_current = has_current || lag == 0;
      next.axpy(-alpha * w, forcing[t - lag]);
    }
    if (!has_current) {
      throw std::invalid_argument("simulate_system: step " + std::to_string(t) +
                                  " has no lag-0 weight");
    }
    r.push_back(std::move(next));
  }
  return r;
}

std::vector<Vector> simulate_system(std::span<const double> hessian_eigs,
                                    const WeightSchedule& schedule, double alpha,
                                    const Vector& r0, std::span<const Vector> noise,
                                    std::size_t T) {
  return simulate_system(Matrix::diagonal(hessian_eigs), schedule, alpha, r0, noise, T);
}

double fitted_rate(std::span<const double> values) {
  double n = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) continue;
    const double x = static_cast<double>(i);
    const double y = std::log(values[i]);
    n += 1.0;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  require(n >= 2.0 && denom > 0.0, "fitted_rate: need at least two positive values");
  return std::exp((n * sxy - sx * sy) / denom);
}

}  // namespace critgrad
