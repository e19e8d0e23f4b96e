#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "critgrad/buffer.hpp"
#include "critgrad/optim.hpp"
#include "critgrad/problems.hpp"

namespace critgrad {

/// Objective to optimise. `kind` is quadratic, ridge or logreg.
struct ProblemSpec {
  std::string kind = "quadratic";
  // quadratic
  std::vector<double> eigs{1.0, 10.0};
  bool rotate = false;
  /// θ*; empty means the origin.
  std::vector<double> theta_star;
  // ridge / logreg: synthetic data unless data_path is set
  std::size_t samples = 500;
  std::size_t features = 10;
  double class_sep = 1.0;
  double flip_prob = 0.0;
  double lambda = 0.1;
  std::string data_path;
  /// Seeds data generation and the quadratic rotation.
  std::uint64_t seed = 0;
  /// Every coordinate of θ_0.
  double theta0 = 1.0;

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

struct OptimizerSpec {
  Rule rule = Rule::Sgd;
  Hyperparameters hyper{};

  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

struct BufferSpec {
  std::size_t topc = 5;
  double decay = 0.9;
  Selection selection = Selection::KingOfTheHill;
  Replacement replacement = Replacement::MinProxy;

  friend bool operator==(const BufferSpec&, const BufferSpec&) = default;
};

/// `kind` is gaussian (additive N(0, σ²) per coordinate) or minibatch.
struct OracleSpec {
  std::string kind = "gaussian";
  double sigma = 0.0;
  std::size_t batch = 10;

  friend bool operator==(const OracleSpec&, const OracleSpec&) = default;
};

/// Strategy matrix for ablation sweeps; empty lists fall back to the base
/// config's value.
struct AblationSpec {
  std::vector<Selection> selections;
  std::vector<Replacement> replacements;
  std::vector<AggregationMode> aggregations;

  friend bool operator==(const AblationSpec&, const AblationSpec&) = default;
};

struct ExperimentConfig {
  ProblemSpec problem;
  OptimizerSpec optimizer;
  BufferSpec buffer;
  AggregationMode aggregation = AggregationMode::Mean;
  OracleSpec oracle;
  std::size_t steps = 1000;
  std::vector<std::uint64_t> seeds{0};
  /// Buffer snapshot interval in steps.
  std::size_t epoch = 100;
  /// Relative loss gap counted as reached for steps-to-threshold.
  double threshold = 0.01;
  AblationSpec ablation;
  std::string out = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parse a JSON document. Missing keys keep their defaults; unknown keys,
/// wrong types and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field, in a form parse_config() reads back to an equal config.
std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError if any field violates a module precondition.
void validate(const ExperimentConfig& config);

std::shared_ptr<const Problem> build_problem(const ProblemSpec& spec);
Vector initial_point(const ExperimentConfig& config, std::size_t dimension);

}  // namespace critgrad
