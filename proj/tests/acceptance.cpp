// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures (capped at 1 for ctest).
//
// usage: critgrad_acceptance <path-to-critgrad-cli> <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "critgrad/config.hpp"
#include "critgrad/harness.hpp"
#include "critgrad/numerics.hpp"
#include "critgrad/optim.hpp"
#include "critgrad/problems.hpp"
#include "critgrad/random.hpp"
#include "critgrad/theory.hpp"

namespace fs = std::filesystem;
using namespace critgrad;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s [%2d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

const std::vector<double> kEigs = linspace(1.0, 10.0, 5);

/// Mean over seeds of the time-averaged ‖r_t‖² on steps [from, to).
double steady_state(std::size_t capacity, double alpha, std::size_t from, std::size_t to,
                    std::size_t seeds) {
  const auto problem = make_quadratic(kEigs, Vector::zeros(5), false, 0);
  double total = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const RandomState base(1000 + s);
    OptimizerState opt(Rule::Sgd, Vector::filled(5, 1.0), Hyperparameters{.lr = alpha});
    CriticalBuffer buffer(capacity, 0.9, Selection::KingOfTheHill, Replacement::MinProxy,
                          base.fork(2));
    auto oracle = GradientOracle::additive_gaussian(1.0, base.fork(1));
    RecordOptions record;
    record.ages = false;
    record.weights = false;
    const Trajectory tr = train(*problem, opt, buffer, AggregationMode::Mean, to, oracle, record);
    double acc = 0.0;
    for (std::size_t t = from; t < to; ++t) acc += *tr.steps[t].dist_to_opt * *tr.steps[t].dist_to_opt;
    total += acc / static_cast<double>(to - from);
  }
  return total / static_cast<double>(seeds);
}

ExperimentConfig convex_task() {
  ExperimentConfig c;
  c.problem.kind = "logreg";
  c.problem.samples = 500;
  c.problem.features = 10;
  c.problem.class_sep = 1.0;
  c.problem.lambda = 0.1;
  c.problem.seed = 7;
  c.problem.theta0 = 0.0;
  c.oracle.kind = "minibatch";
  c.oracle.batch = 10;
  c.steps = 50 * 500 / 10;  // 50 passes
  c.seeds = {0};
  c.buffer.topc = 5;
  c.buffer.decay = 0.9;
  return c;
}

/// Best vanilla step size on the grid {0.1, 0.01, 0.001}, shared by the _C variant.
double lr_for(Rule rule) { return rule == Rule::Sgd ? 0.01 : 0.001; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "critgrad_acceptance";

  report(1, "K=1 rate reduction", [] {
    double worst = 0.0;
    for (double alpha : linspace(0.01, 0.5, 10))
      for (double mu : linspace(0.1, 5.0, 10))
        for (double ratio : linspace(1.0, 20.0, 10)) {
          const double L = mu * ratio;
          const double expect = std::max(std::abs(1.0 - alpha * mu), std::abs(1.0 - alpha * L));
          worst = std::max(worst, std::abs(rate_sv({alpha, 1, mu, L}) - expect));
        }
    return Outcome{worst <= 1e-12, fmt::format("max |q_sv - max|1-a*eta|| = {:.2e} (tol 1e-12)", worst)};
  });

  report(2, "oracle equivalence with the linear system", [] {
    ExperimentConfig c;
    c.problem.eigs = kEigs;
    c.problem.rotate = true;
    c.problem.seed = 11;
    c.problem.theta_star = {1.0, -1.0, 0.5, 2.0, 0.0};
    c.buffer.topc = 4;
    c.buffer.decay = 0.9;
    c.aggregation = AggregationMode::Mean;
    c.oracle.sigma = 1.0;
    c.optimizer.hyper.lr = 0.05;
    c.steps = 200;
    const SimulationCheck s = simulate_check(c, 3);
    return Outcome{s.max_discrepancy < 1e-10,
                   fmt::format("max ||r_opt - r_sim|| = {:.2e} over 200 steps, K = {} (tol 1e-10)",
                               s.max_discrepancy, s.staleness)};
  });

  report(3, "noiseless linear convergence", [] {
    const auto problem = make_quadratic(kEigs, Vector::zeros(5), false, 0);
    OptimizerState opt(Rule::Sgd, Vector::filled(5, 1.0), Hyperparameters{.lr = 0.05});
    CriticalBuffer buffer(4, 0.7);
    auto oracle = GradientOracle::additive_gaussian(0.0, RandomState(0));
    const Trajectory tr = train(*problem, opt, buffer, AggregationMode::Mean, 2000, oracle);
    std::vector<double> dist;
    for (const auto& r : tr.steps) dist.push_back(*r.dist_to_opt);
    const auto hit = std::find_if(dist.begin(), dist.end(), [](double d) { return d <= 1e-8; });
    const double rate = fitted_rate(std::span<const double>(dist).subspan(1500));
    const bool ok = hit != dist.end() && rate < 1.0;
    return Outcome{ok, fmt::format("||r|| <= 1e-8 at step {}, final {:.2e}, fitted rate {:.6f}",
                                   hit == dist.end() ? -1 : hit - dist.begin() + 1, dist.back(), rate)};
  });

  report(4, "variance neighbourhood, K=1", [] {
    const double alpha = 0.01;
    const double q = rate_sv({alpha, 1, kEigs.front(), kEigs.back()});
    const double bound = variance_bound(alpha, 1, q, 1.0 * 5.0);
    const double measured = steady_state(0, alpha, 5000, 10000, 20);
    return Outcome{measured <= bound,
                   fmt::format("mean ||r||^2 = {:.5f} <= bound {:.5f} (q = {})", measured, bound, q)};
  });

  report(5, "neighbourhood scaling with step size, K>=2", [] {
    const double alpha = 0.02;
    const double full = steady_state(4, alpha, 2000, 8000, 20);
    const double half = steady_state(4, alpha / 2.0, 2000, 8000, 20);
    const double ratio = half / full;
    return Outcome{ratio >= 0.15 && ratio <= 0.5,
                   fmt::format("E||r||^2 at a = {:.5f}, at a/2 = {:.5f}, ratio {:.4f} (need [0.15, 0.5])",
                               full, half, ratio)};
  });

  std::vector<std::string> lines;
  report(6, "convex convergence, 8 optimizers", [&] {
    bool ok = true;
    std::string detail;
    for (Rule rule : {Rule::Sgd, Rule::Sgdm, Rule::RmsProp, Rule::Adam}) {
      for (std::size_t topc : {std::size_t{0}, std::size_t{5}}) {
        ExperimentConfig c = convex_task();
        c.optimizer.rule = rule;
        c.optimizer.hyper.lr = lr_for(rule);
        c.buffer.topc = topc;
        c.aggregation = rule == Rule::Sgd || rule == Rule::Sgdm ? AggregationMode::Sum
                                                                : AggregationMode::Mean;
        c.ablation = {};
        c.out = "unused";
        const auto rows = critgrad::ablate(c, false);
        const double gap = rows.front().relative_gap;
        ok = ok && std::abs(gap) <= 0.01;
        detail += fmt::format("{}{}={:+.2e} ", to_string(rule), topc ? "_C" : "", gap);
      }
    }
    return Outcome{ok, detail + "(relative gap, tol 1e-2)"};
  });

  report(7, "ablation convergence, all strategies", [] {
    ExperimentConfig c = convex_task();
    c.optimizer.rule = Rule::Sgd;
    c.optimizer.hyper.lr = lr_for(Rule::Sgd);
    c.aggregation = AggregationMode::Sum;
    c.ablation.selections = {Selection::KingOfTheHill, Selection::BottomC,
                             Selection::Fifo,          Selection::CoinToss,
                             Selection::MeanNormDiversity, Selection::CosineDiversity,
                             Selection::CosineSimilarity};
    c.ablation.replacements = {Replacement::MinProxy, Replacement::Random,
                               Replacement::NormControlled};
    const auto rows = critgrad::ablate(c, false);
    double worst = 0.0;
    std::string who;
    for (const auto& r : rows) {
      if (std::abs(r.relative_gap) >= worst) {
        worst = std::abs(r.relative_gap);
        who = fmt::format("{}/{}", to_string(r.selection), to_string(r.replacement));
      }
    }
    return Outcome{worst <= 0.05 && rows.size() == 21,
                   fmt::format("{} cells, worst relative gap {:.2e} ({}) (tol 5e-2)", rows.size(),
                               worst, who)};
  });

  report(8, "staleness control by decay", [] {
    auto max_age = [](double decay) {
      ExperimentConfig c = convex_task();
      c.optimizer.hyper.lr = lr_for(Rule::Sgd);
      c.aggregation = AggregationMode::Sum;
      c.buffer.decay = decay;
      std::size_t m = 0;
      for (const auto& r : run_seeds(c))
        for (const auto& row : r.rows) m = std::max(m, row.buffer_max_age);
      return m;
    };
    const std::size_t fast = max_age(0.7);
    const std::size_t slow = max_age(0.99);
    return Outcome{fast < slow, fmt::format("max age: decay 0.7 -> {}, decay 0.99 -> {}", fast, slow)};
  });

  report(9, "gradient correctness and oracle statistics", [] {
    RandomState rng(99);
    const auto quad = make_quadratic(kEigs, Vector{0.5, -1.0, 2.0, 0.0, 1.0}, true, 5);
    const Dataset reg = synth_classification(200, 6, 1.0, 0.1, 3);
    const auto ridge = make_ridge(reg, 0.05);
    const auto logreg = make_logreg(reg, 0.1);
    double worst = 0.0;
    for (const Problem* p : {static_cast<const Problem*>(quad.get()),
                             static_cast<const Problem*>(ridge.get()),
                             static_cast<const Problem*>(logreg.get())}) {
      for (int i = 0; i < 20; ++i) {
        worst = std::max(worst, finite_diff_check(*p, gaussian(rng, p->dimension(), 1.0), 1e-5));
      }
    }
    bool ok = worst < 1e-5;

    // Additive Gaussian: mean within 3σ√d/√N per coordinate, E‖ζ‖² within 5% of dσ².
    const std::size_t N = 100000;
    const double sigma = 0.7;
    const Vector theta = Vector{0.3, -0.2, 0.1, 0.0, 0.4};
    const Vector full = quad->gradient(theta);
    auto gauss = GradientOracle::additive_gaussian(sigma, RandomState(5));
    Vector mean = Vector::zeros(5);
    double sq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      Vector g = gauss.sample(*quad, theta);
      sq += (g - full).squared_norm();
      mean += g;
    }
    mean *= 1.0 / static_cast<double>(N);
    double mean_err = 0.0;
    for (std::size_t j = 0; j < 5; ++j) mean_err = std::max(mean_err, std::abs(mean[j] - full[j]));
    const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(N)) * std::sqrt(5.0);
    const double var_ratio = sq / static_cast<double>(N) / (5.0 * sigma * sigma);
    ok = ok && mean_err <= tol && std::abs(var_ratio - 1.0) <= 0.05;

    // Minibatch: mean within 3·sd√d/√N of the full gradient per coordinate.
    const Vector th = gaussian(rng, 6, 0.5);
    const Vector lfull = logreg->gradient(th);
    auto mb = GradientOracle::minibatch(5, RandomState(6));
    Vector m1 = Vector::zeros(6);
    Vector m2 = Vector::zeros(6);
    for (std::size_t i = 0; i < N; ++i) {
      const Vector g = mb.sample(*logreg, th);
      for (std::size_t j = 0; j < 6; ++j) {
        m1[j] += g[j];
        m2[j] += g[j] * g[j];
      }
    }
    double mb_err = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double mj = m1[j] / static_cast<double>(N);
      const double sd = std::sqrt(std::max(0.0, m2[j] / static_cast<double>(N) - mj * mj));
      const double t = 3.0 * sd * std::sqrt(6.0) / std::sqrt(static_cast<double>(N));
      mb_err = std::max(mb_err, std::abs(mj - lfull[j]) / t);
    }
    ok = ok && mb_err <= 1.0;
    return Outcome{ok, fmt::format("fd error {:.2e} (tol 1e-5); gaussian mean err {:.2e} (tol {:.2e}), "
                                   "var ratio {:.4f}; minibatch mean err {:.2f} of tol",
                                   worst, mean_err, tol, var_ratio, mb_err)};
  });

  report(10, "structural theory facts", [] {
    RandomState rng(2024);
    double min_sv = 1e300;
    double worst_excess = -1e300;
    for (std::size_t K = 2; K <= 6; ++K) {
      for (double alpha : {0.01, 0.1, 0.3}) {
        for (auto [mu, L] : {std::pair{1.0, 1.0}, std::pair{0.5, 4.0}, std::pair{1.0, 10.0}}) {
          const RateQuery q{alpha, K, mu, L};
          const double qsv = rate_sv(q);
          min_sv = std::min(min_sv, qsv);
          for (int s = 0; s < 1000; ++s) {
            std::vector<double> w(K - 1), eta(K);
            for (auto& x : w) x = rng.uniform();
            for (auto& x : eta) x = mu + (L - mu) * rng.uniform();
            const double v = spectral_norm(lambda_matrix(lambda_coeffs(alpha, w, eta)));
            worst_excess = std::max(worst_excess, v - qsv);
          }
        }
      }
    }
    double companion_err = 0.0;
    for (int s = 0; s < 100; ++s) {
      const std::size_t K = 1 + rng.uniform_index(8);
      std::vector<double> c(K);
      for (auto& x : c) x = 2.0 * rng.uniform() - 1.0;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
      for (std::size_t j = 0; j < K; ++j) m(0, static_cast<Eigen::Index>(j)) = c[j];
      for (std::size_t i = 1; i < K; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
      const double oracle = m.eigenvalues().cwiseAbs().maxCoeff();
      companion_err = std::max(companion_err, std::abs(companion_spectral_radius(c) - oracle));
    }
    const bool ok = min_sv >= 1.0 && worst_excess <= 1e-12 && companion_err <= 1e-7;
    return Outcome{ok, fmt::format("min q_sv over K in 2..6 = {:.6f}; max interior excess {:.2e}; "
                                   "companion vs Eigen {:.2e} (tol 1e-7)",
                                   min_sv, worst_excess, companion_err)};
  });

  report(11, "CLI determinism", [&] {
    if (cli.empty()) return Outcome{false, "no CLI path given"};
    fs::create_directories(scratch);
    const fs::path config = scratch / "det.json";
    {
      ExperimentConfig c = convex_task();
      c.steps = 500;
      c.buffer.selection = Selection::CoinToss;
      c.buffer.replacement = Replacement::NormControlled;
      std::ofstream(config) << serialize_config(c);
    }
    auto invoke = [&](const char* dir) {
      const std::string cmd = fmt::format("\"{}\" train --config \"{}\" --seed 42 --out \"{}\" > /dev/null",
                                          cli, config.string(), (scratch / dir).string());
      return std::system(cmd.c_str());
    };
    if (invoke("a") != 0 || invoke("b") != 0) return Outcome{false, "CLI train failed"};
    bool same = true;
    for (const char* f : {"run_seed42.csv", "buffer_seed42.csv", "summary.json"}) {
      const std::string a = slurp(scratch / "a" / f);
      same = same && !a.empty() && a == slurp(scratch / "b" / f);
    }
    return Outcome{same, same ? "run, buffer and summary files byte-identical" : "outputs differ"};
  });

  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
