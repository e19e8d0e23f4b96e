#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "critgrad/errors.hpp"
#include "critgrad/problems.hpp"

namespace critgrad {

Dataset synth_classification(std::size_t n, std::size_t d, double class_sep, double flip_prob,
                             std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("synth_classification: n and d must be positive");
  if (n > kMaxSamples || d > kMaxFeatures) {
    throw std::invalid_argument("synth_classification: exceeds desk-scale limits");
  }
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw std::invalid_argument("synth_classification: flip_prob must lie in [0, 1]");
  }
  if (!(class_sep >= 0.0) || !std::isfinite(class_sep)) {
    throw std::invalid_argument("synth_classification: class_sep must be nonnegative");
  }

  RandomState rng(seed);
  Matrix x(n, d);
  std::vector<double> y(n);
  const double offset = 0.5 * class_sep / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const double cluster = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = cluster * offset + rng.standard_normal();
    const bool flip = rng.uniform() < flip_prob;
    y[i] = flip ? -cluster : cluster;
  }
  return Dataset{std::move(x), std::move(y), seed, flip_prob};
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open dataset for writing: " + path.string());
  std::string line;
  for (std::size_t j = 0; j < data.dimension(); ++j) line += fmt::format("x{},", j);
  line += "y\n";
  out << line;
  for (std::size_t i = 0; i < data.samples(); ++i) {
    line.clear();
    for (double v : data.features.row(i)) line += fmt::format("{:.17g},", v);
    line += fmt::format("{:.17g}\n", data.labels[i]);
    out << line;
  }
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IoError("dataset has no header line: " + path.string());

  std::size_t columns = 1;
  for (char c : header) columns += c == ',' ? 1 : 0;
  if (columns < 2) throw IoError("dataset header needs at least one feature and a label");
  const std::size_t d = columns - 1;

  std::vector<double> values;
  std::vector<double> labels;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string field;
    std::size_t count = 0;
    while (std::getline(fields, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw IoError(fmt::format("{}:{}: bad numeric field '{}'", path.string(), line_no, field));
      }
      if (count < d) {
        values.push_back(v);
      } else {
        labels.push_back(v);
      }
      ++count;
    }
    if (count != columns) {
      throw IoError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), line_no,
                                columns, count));
    }
  }
  if (labels.empty()) throw IoError("dataset has no samples: " + path.string());
  const std::size_t n = labels.size();
  return Dataset{Matrix(n, d, std::move(values)), std::move(labels), 0, 0.0};
}

}  // namespace critgrad
