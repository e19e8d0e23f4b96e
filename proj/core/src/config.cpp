#include "critgrad/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "critgrad/errors.hpp"

namespace critgrad {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

/// Reads the keys of one JSON object and rejects whatever was not asked for.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  bool has(const char* key) const { return node_.contains(key); }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(where(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(where(key), "must be finite");
    }
  }

  template <class T>
    requires std::is_integral_v<T> && std::is_unsigned_v<T>
  void read(const char* key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(where(key), "expected a nonnegative integer");
      out = v->get<T>();
    }
  }

  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(where(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(where(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(where(key), "expected an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(where(key), "expected an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }

  void read(const char* key, std::vector<std::uint64_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(where(key), "expected an array of nonnegative integers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number_unsigned()) fail(where(key), "expected an array of nonnegative integers");
        out.push_back(x.get<std::uint64_t>());
      }
    }
  }

  template <class Enum, class Parse>
  void read_enum(const char* key, Enum& out, Parse parse) {
    std::string name;
    if (!has(key)) {
      seen_.insert(key);
      return;
    }
    read(key, name);
    auto parsed = parse(name);
    if (!parsed) fail(where(key), "unknown value '" + name + "'");
    out = *parsed;
  }

  template <class Enum, class Parse>
  void read_enum_list(const char* key, std::vector<Enum>& out, Parse parse) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(where(key), "expected an array of names");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_string()) fail(where(key), "expected an array of names");
        auto parsed = parse(x.get<std::string>());
        if (!parsed) fail(where(key), "unknown value '" + x.get<std::string>() + "'");
        out.push_back(*parsed);
      }
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    static const json empty = json::object();
    return Section(it == node_.end() ? empty : *it, where(key));
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) fail(where(key.c_str()), "unknown key");
    }
  }

 private:
  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Enum>
json names(const std::vector<Enum>& values) {
  json out = json::array();
  for (auto v : values) out.push_back(std::string(to_string(v)));
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }

  ExperimentConfig c;
  Section root(doc, "");
  {
    auto s = root.child("problem");
    auto& p = c.problem;
    s.read("kind", p.kind);
    s.read("eigs", p.eigs);
    s.read("rotate", p.rotate);
    s.read("theta_star", p.theta_star);
    s.read("samples", p.samples);
    s.read("features", p.features);
    s.read("class_sep", p.class_sep);
    s.read("flip_prob", p.flip_prob);
    s.read("lambda", p.lambda);
    s.read("data_path", p.data_path);
    s.read("seed", p.seed);
    s.read("theta0", p.theta0);
    s.finish();
  }
  {
    auto s = root.child("optimizer");
    s.read_enum("rule", c.optimizer.rule, parse_rule);
    auto& h = c.optimizer.hyper;
    s.read("lr", h.lr);
    s.read("momentum", h.momentum);
    s.read("beta1", h.beta1);
    s.read("beta2", h.beta2);
    s.read("epsilon", h.epsilon);
    s.read("rms_smoothing", h.rms_smoothing);
    s.finish();
  }
  {
    auto s = root.child("buffer");
    s.read("topc", c.buffer.topc);
    s.read("decay", c.buffer.decay);
    s.read_enum("selection", c.buffer.selection, parse_selection);
    s.read_enum("replacement", c.buffer.replacement, parse_replacement);
    s.finish();
  }
  root.read_enum("aggregation", c.aggregation, parse_aggregation);
  {
    auto s = root.child("oracle");
    s.read("kind", c.oracle.kind);
    s.read("sigma", c.oracle.sigma);
    s.read("batch", c.oracle.batch);
    s.finish();
  }
  root.read("steps", c.steps);
  root.read("seeds", c.seeds);
  root.read("epoch", c.epoch);
  root.read("threshold", c.threshold);
  {
    auto s = root.child("ablation");
    s.read_enum_list("selections", c.ablation.selections, parse_selection);
    s.read_enum_list("replacements", c.ablation.replacements, parse_replacement);
    s.read_enum_list("aggregations", c.ablation.aggregations, parse_aggregation);
    s.finish();
  }
  root.read("out", c.out);
  root.finish();

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("config: cannot read " + path.string());
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  const auto& p = c.problem;
  const auto& h = c.optimizer.hyper;
  json doc{
      {"problem",
       {{"kind", p.kind},
        {"eigs", p.eigs},
        {"rotate", p.rotate},
        {"theta_star", p.theta_star},
        {"samples", p.samples},
        {"features", p.features},
        {"class_sep", p.class_sep},
        {"flip_prob", p.flip_prob},
        {"lambda", p.lambda},
        {"data_path", p.data_path},
        {"seed", p.seed},
        {"theta0", p.theta0}}},
      {"optimizer",
       {{"rule", std::string(to_string(c.optimizer.rule))},
        {"lr", h.lr},
        {"momentum", h.momentum},
        {"beta1", h.beta1},
        {"beta2", h.beta2},
        {"epsilon", h.epsilon},
        {"rms_smoothing", h.rms_smoothing}}},
      {"buffer",
       {{"topc", c.buffer.topc},
        {"decay", c.buffer.decay},
        {"selection", std::string(to_string(c.buffer.selection))},
        {"replacement", std::string(to_string(c.buffer.replacement))}}},
      {"aggregation", std::string(to_string(c.aggregation))},
      {"oracle", {{"kind", c.oracle.kind}, {"sigma", c.oracle.sigma}, {"batch", c.oracle.batch}}},
      {"steps", c.steps},
      {"seeds", c.seeds},
      {"epoch", c.epoch},
      {"threshold", c.threshold},
      {"ablation",
       {{"selections", names(c.ablation.selections)},
        {"replacements", names(c.ablation.replacements)},
        {"aggregations", names(c.ablation.aggregations)}}},
      {"out", c.out},
  };
  return doc.dump(2);
}

void validate(const ExperimentConfig& c) {
  const auto& p = c.problem;
  if (p.kind == "quadratic") {
    if (p.eigs.empty()) fail("problem.eigs", "need at least one eigenvalue");
    for (double e : p.eigs) {
      if (!(e > 0.0) || !std::isfinite(e)) fail("problem.eigs", "eigenvalues must be positive");
    }
    if (!p.theta_star.empty() && p.theta_star.size() != p.eigs.size()) {
      fail("problem.theta_star", "length must match problem.eigs");
    }
  } else if (p.kind == "ridge" || p.kind == "logreg") {
    if (p.data_path.empty()) {
      if (p.samples == 0 || p.samples > kMaxSamples) fail("problem.samples", "must lie in [1, 100000]");
      if (p.features == 0 || p.features > kMaxFeatures) fail("problem.features", "must lie in [1, 1000]");
    }
    if (!(p.flip_prob >= 0.0 && p.flip_prob <= 1.0)) fail("problem.flip_prob", "must lie in [0, 1]");
    if (p.kind == "logreg" ? !(p.lambda > 0.0) : !(p.lambda >= 0.0)) {
      fail("problem.lambda", p.kind == "logreg" ? "must be positive" : "must be nonnegative");
    }
  } else {
    fail("problem.kind", "expected quadratic, ridge or logreg, got '" + p.kind + "'");
  }
  if (!std::isfinite(p.theta0)) fail("problem.theta0", "must be finite");

  try {
    OptimizerState probe(c.optimizer.rule, Vector::zeros(1), c.optimizer.hyper);
  } catch (const std::invalid_argument& e) {
    fail("optimizer", e.what());
  }

  if (!(c.buffer.decay >= 0.0 && c.buffer.decay < 1.0)) fail("buffer.decay", "must lie in [0, 1)");

  if (c.oracle.kind == "gaussian") {
    if (!(c.oracle.sigma >= 0.0)) fail("oracle.sigma", "must be nonnegative");
  } else if (c.oracle.kind == "minibatch") {
    if (p.kind == "quadratic") fail("oracle.kind", "minibatch needs a finite-sum problem");
    if (c.oracle.batch == 0) fail("oracle.batch", "must be positive");
    if (p.data_path.empty() && c.oracle.batch > p.samples) {
      fail("oracle.batch", "exceeds the number of samples");
    }
  } else {
    fail("oracle.kind", "expected gaussian or minibatch, got '" + c.oracle.kind + "'");
  }

  if (c.seeds.empty()) fail("seeds", "need at least one seed");
  if (c.epoch == 0) fail("epoch", "must be positive");
  if (!(c.threshold > 0.0)) fail("threshold", "must be positive");
  if (c.out.empty()) fail("out", "must not be empty");
}

std::shared_ptr<const Problem> build_problem(const ProblemSpec& p) {
  try {
    if (p.kind == "quadratic") {
      Vector star = p.theta_star.empty() ? Vector::zeros(p.eigs.size()) : Vector(p.theta_star);
      return make_quadratic(p.eigs, star, p.rotate, p.seed);
    }
    Dataset data = p.data_path.empty()
                       ? synth_classification(p.samples, p.features, p.class_sep, p.flip_prob, p.seed)
                       : load_dataset(p.data_path);
    if (p.kind == "ridge") return make_ridge(std::move(data), p.lambda);
    return make_logreg(std::move(data), p.lambda);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: problem: ") + e.what());
  }
}

Vector initial_point(const ExperimentConfig& config, std::size_t dimension) {
  return Vector::filled(dimension, config.problem.theta0);
}

}  // namespace critgrad
