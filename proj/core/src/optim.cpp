#include "critgrad/optim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace critgrad {

namespace {

constexpr std::array<std::pair<std::string_view, Rule>, 4> kRuleNames{{
    {"sgd", Rule::Sgd},
    {"sgdm", Rule::Sgdm},
    {"rmsprop", Rule::RmsProp},
    {"adam", Rule::Adam},
}};

bool unit_interval(double x) { return x >= 0.0 && x < 1.0; }

void require_rule(const OptimizerState& state, Rule rule, const char* what) {
  if (state.rule != rule) {
    throw std::invalid_argument(std::string(what) + ": optimizer rule mismatch");
  }
}

}  // namespace

std::string_view to_string(Rule rule) {
  for (const auto& [name, r] : kRuleNames)
    if (r == rule) return name;
  return "?";
}

std::optional<Rule> parse_rule(std::string_view name) {
  for (const auto& [key, r] : kRuleNames)
    if (key == name) return r;
  return std::nullopt;
}

OptimizerState::OptimizerState(Rule rule_, Vector theta0, Hyperparameters hyper_)
    : rule(rule_),
      theta(std::move(theta0)),
      hyper(hyper_),
      first_moment(Vector::zeros(theta.size())),
      second_moment(Vector::zeros(theta.size())) {
  if (!(hyper.lr > 0.0) || !std::isfinite(hyper.lr)) {
    throw std::invalid_argument("optimizer: learning rate must be positive");
  }
  switch (rule) {
    case Rule::Sgd:
      break;
    case Rule::Sgdm:
      if (!unit_interval(hyper.momentum)) {
        throw std::invalid_argument("optimizer: momentum must lie in [0, 1)");
      }
      break;
    case Rule::RmsProp:
      if (!unit_interval(hyper.rms_smoothing)) {
        throw std::invalid_argument("optimizer: RMSprop smoothing must lie in [0, 1)");
      }
      if (!(hyper.epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
      break;
    case Rule::Adam:
      if (!unit_interval(hyper.beta1) || !unit_interval(hyper.beta2)) {
        throw std::invalid_argument("optimizer: Adam betas must lie in [0, 1)");
      }
      if (!(hyper.epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
      break;
  }
}

Vector aggregate(const Vector& g, const CriticalBuffer& buffer, AggregationMode mode) {
  const auto contributions = buffer.entries_and_weights(mode);
  if (contributions.empty()) return g;
  Vector out = g;
  out *= current_gradient_weight(mode, buffer.size());
  for (const auto& c : contributions) out.axpy(c.weight, *c.gradient);
  return out;
}

void step_sgd(OptimizerState& state, const Vector& g_agg) {
  require_rule(state, Rule::Sgd, "step_sgd");
  require_same_dimension(state.theta, g_agg, "step_sgd");
  state.theta.axpy(-state.hyper.lr, g_agg);
  ++state.t;
}

void step_sgdm(OptimizerState& state, const Vector& g_agg) {
  require_rule(state, Rule::Sgdm, "step_sgdm");
  require_same_dimension(state.theta, g_agg, "step_sgdm");
  auto& m = state.first_moment;
  m *= state.hyper.momentum;
  m += g_agg;
  state.theta.axpy(-state.hyper.lr, m);
  ++state.t;
}

void step_rmsprop(OptimizerState& state, const Vector& g_agg) {
  require_rule(state, Rule::RmsProp, "step_rmsprop");
  require_same_dimension(state.theta, g_agg, "step_rmsprop");
  const double rho = state.hyper.rms_smoothing;
  auto& e = state.second_moment;
  for (std::size_t i = 0; i < g_agg.size(); ++i) {
    e[i] = rho * e[i] + (1.0 - rho) * g_agg[i] * g_agg[i];
    state.theta[i] -= state.hyper.lr / std::sqrt(e[i] + state.hyper.epsilon) * g_agg[i];
  }
  ++state.t;
}

void step_adam(OptimizerState& state, const Vector& g_agg) {
  require_rule(state, Rule::Adam, "step_adam");
  require_same_dimension(state.theta, g_agg, "step_adam");
  ++state.t;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  for (std::size_t i = 0; i < g_agg.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g_agg[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g_agg[i] * g_agg[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    state.theta[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

void step(OptimizerState& state, const Vector& g_agg) {
  switch (state.rule) {
    case Rule::Sgd:
      return step_sgd(state, g_agg);
    case Rule::Sgdm:
      return step_sgdm(state, g_agg);
    case Rule::RmsProp:
      return step_rmsprop(state, g_agg);
    case Rule::Adam:
      return step_adam(state, g_agg);
  }
}

Trajectory train(const Problem& problem, OptimizerState& opt, CriticalBuffer& buffer,
                 AggregationMode mode, std::size_t steps, GradientOracle& oracle,
                 const RecordOptions& record) {
  if (opt.theta.size() != problem.dimension()) {
    throw std::invalid_argument("train: parameter dimension does not match the problem");
  }
  const Vector* optimum = nullptr;
  if (problem.theta_star()) {
    optimum = &*problem.theta_star();
  } else if (record.reference_optimum) {
    optimum = &*record.reference_optimum;
  }

  Trajectory out;
  out.steps.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    StepRecord rec{};
    rec.step = t;

    std::optional<Vector> noise;
    Vector g = [&] {
      if (!record.noise) return oracle.sample(problem, opt.theta);
      auto s = oracle.sample_with_noise(problem, opt.theta);
      noise = std::move(s.noise);
      return std::move(s.gradient);
    }();

    rec.grad_norm = g.norm();
    rec.gc_norm_mean = buffer.mean_true_norm();
    rec.buffer_size_before = buffer.size();
    if (record.weights) {
      rec.contributions.push_back({t, current_gradient_weight(mode, buffer.size())});
      for (const auto& c : buffer.entries_and_weights(mode)) {
        rec.contributions.push_back({c.source_step, c.weight});
      }
    }

    step(opt, aggregate(g, buffer, mode));
    rec.accepted = buffer.offer(g, t);
    buffer.decay_all();

    rec.loss = problem.loss(opt.theta);
    if (optimum != nullptr) rec.dist_to_opt = (opt.theta - *optimum).norm();
    rec.buffer_size = buffer.size();
    rec.buffer_min_proxy = buffer.min_proxy();
    if (record.ages) rec.ages = buffer.ages(t);
    rec.noise = std::move(noise);
    if (record.theta) rec.theta = opt.theta;
    if (record.snapshot_interval != 0 && (t + 1) % record.snapshot_interval == 0) {
      for (const auto& e : buffer.entries()) {
        rec.snapshot.push_back({e.proxy_norm, e.true_norm, t - e.inserted_at});
      }
    }
    out.steps.push_back(std::move(rec));
  }
  return out;
}

}  // namespace critgrad
