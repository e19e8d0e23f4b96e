#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "critgrad/buffer.hpp"
#include "critgrad/numerics.hpp"
#include "critgrad/problems.hpp"

namespace critgrad {

enum class Rule { Sgd, Sgdm, RmsProp, Adam };

std::string_view to_string(Rule rule);
std::optional<Rule> parse_rule(std::string_view name);

struct Hyperparameters {
  double lr = 0.01;
  double momentum = 0.9;      // SGDM γ
  double beta1 = 0.9;         // Adam
  double beta2 = 0.999;       // Adam
  double epsilon = 1e-8;      // RMSprop / Adam
  double rms_smoothing = 0.9; // RMSprop: E ← ρ E + (1-ρ) g²

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Parameters plus the per-rule accumulators. `first_moment` is the SGDM
/// momentum or Adam m; `second_moment` is RMSprop E[g²] or Adam v.
struct OptimizerState {
  Rule rule;
  Vector theta;
  Hyperparameters hyper;
  Vector first_moment;
  Vector second_moment;
  std::size_t t = 0;

  /// Validates hyperparameters for `rule`; throws std::invalid_argument.
  OptimizerState(Rule rule, Vector theta0, Hyperparameters hyper = {});
};

/// Combine the current gradient with the buffer contents.
/// Mean: (g + Σ g_c)/(n+1). Sum: g + Σ g_c / n. The single-entry modes average
/// g with the entry of min/max/lower-median true norm. Empty buffer: g.
Vector aggregate(const Vector& g, const CriticalBuffer& buffer, AggregationMode mode);

/// θ ← θ - α g
void step_sgd(OptimizerState& state, const Vector& g_agg);
/// m ← γ m + g;  θ ← θ - α m
void step_sgdm(OptimizerState& state, const Vector& g_agg);
/// E ← ρ E + (1-ρ) g²;  θ ← θ - η g / sqrt(E + ε)
void step_rmsprop(OptimizerState& state, const Vector& g_agg);
/// Bias-corrected Adam with t counted from 1 on the first step.
void step_adam(OptimizerState& state, const Vector& g_agg);
/// Dispatch on state.rule.
void step(OptimizerState& state, const Vector& g_agg);

struct RecordOptions {
  bool ages = true;
  bool weights = true;
  bool noise = false;
  /// Keep θ after every step.
  bool theta = false;
  /// Record the buffer contents after every this many steps; 0 disables.
  std::size_t snapshot_interval = 0;
  /// Used for dist_to_opt when the problem has no closed-form minimizer.
  std::optional<Vector> reference_optimum;
};

/// A gradient that entered the aggregate: its step of origin and weight.
struct Contribution {
  std::size_t source_step;
  double weight;
};

/// One buffer entry at a snapshot.
struct EntrySnapshot {
  double proxy_norm;
  double true_norm;
  std::size_t age;
};

/// Per-step record. Loss and distance are measured after the update; buffer
/// statistics describe the buffer as it was aggregated (gc_norm_mean) and as
/// it stands after offer and decay (size, proxies, ages).
struct StepRecord {
  std::size_t step;
  double loss;
  double grad_norm;
  std::optional<double> dist_to_opt;
  double gc_norm_mean;
  std::size_t buffer_size_before;
  bool accepted;
  std::size_t buffer_size;
  std::optional<double> buffer_min_proxy;
  std::vector<std::size_t> ages;
  /// Current gradient first (source_step == step), then buffer entries.
  std::vector<Contribution> contributions;
  std::optional<Vector> noise;
  std::optional<Vector> theta;
  std::vector<EntrySnapshot> snapshot;
};

struct Trajectory {
  std::vector<StepRecord> steps;
};

/// Run `steps` iterations of: sample g_t → aggregate with the buffer →
/// optimizer step → offer g_t → decay every proxy.
Trajectory train(const Problem& problem, OptimizerState& opt, CriticalBuffer& buffer,
                 AggregationMode mode, std::size_t steps, GradientOracle& oracle,
                 const RecordOptions& record = {});

}  // namespace critgrad
