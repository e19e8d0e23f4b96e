#include "critgrad/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "critgrad/errors.hpp"
#include "critgrad/theory.hpp"

namespace critgrad {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string opt_num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text << '\n';
  close_out(out, path);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, const fs::path& path) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw IoError(path.string() + ": cannot parse '" + cell + "' as a number");
  }
  return value;
}

std::optional<double> maybe(double x) {
  return std::isnan(x) ? std::nullopt : std::optional<double>(x);
}

double relative_gap(double value, double reference) {
  const double scale = std::abs(reference) > 0.0 ? std::abs(reference) : 1.0;
  return (value - reference) / scale;
}

GradientOracle make_oracle(const ExperimentConfig& c, RandomState rng) {
  if (c.oracle.kind == "minibatch") return GradientOracle::minibatch(c.oracle.batch, rng);
  return GradientOracle::additive_gaussian(c.oracle.sigma, rng);
}

SeedResult run_one(const ExperimentConfig& c, const Problem& problem,
                   const std::optional<Vector>& reference, std::uint64_t seed,
                   RecordOptions record) {
  const RandomState base(seed);
  OptimizerState opt(c.optimizer.rule, initial_point(c, problem.dimension()), c.optimizer.hyper);
  CriticalBuffer buffer(c.buffer.topc, c.buffer.decay, c.buffer.selection, c.buffer.replacement,
                        base.fork(2));
  GradientOracle oracle = make_oracle(c, base.fork(1));
  record.snapshot_interval = c.epoch;
  if (!problem.theta_star()) record.reference_optimum = reference;
  SeedResult out{seed, train(problem, opt, buffer, c.aggregation, c.steps, oracle, record), {}};
  out.rows = to_rows(out.trajectory);
  return out;
}

struct Prepared {
  std::shared_ptr<const Problem> problem;
  Reference reference;
};

Prepared prepare(const ExperimentConfig& c) {
  validate(c);
  Prepared p{build_problem(c.problem), {Vector::zeros(1), 0.0, 0.0, 0}};
  if (c.oracle.kind == "minibatch" && c.oracle.batch > p.problem->sample_count()) {
    throw ConfigError("config: oracle.batch: exceeds the number of samples");
  }
  p.reference = solve_reference(*p.problem);
  return p;
}

}  // namespace

std::vector<RunRow> to_rows(const Trajectory& trajectory) {
  std::vector<RunRow> rows;
  rows.reserve(trajectory.steps.size());
  for (const auto& r : trajectory.steps) {
    RunRow row{r.step, r.loss, r.grad_norm, r.dist_to_opt, r.buffer_size, r.buffer_min_proxy,
               0.0, 0, r.gc_norm_mean, 0.0};
    if (!r.ages.empty()) {
      row.buffer_max_age = *std::max_element(r.ages.begin(), r.ages.end());
      row.buffer_mean_age =
          static_cast<double>(std::accumulate(r.ages.begin(), r.ages.end(), std::size_t{0})) /
          static_cast<double>(r.ages.size());
    }
    if (r.buffer_size_before != 0) row.norm_gap = r.gc_norm_mean - r.grad_norm;
    rows.push_back(row);
  }
  return rows;
}

void write_run_csv(const std::vector<RunRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << kRunCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << num(r.loss) << ',' << num(r.grad_norm) << ',' << opt_num(r.dist_to_opt)
        << ',' << r.buffer_size << ',' << opt_num(r.buffer_min_proxy) << ','
        << num(r.buffer_mean_age) << ',' << r.buffer_max_age << ',' << num(r.gc_norm_mean) << ','
        << num(r.norm_gap) << '\n';
  }
  close_out(out, path);
}

void write_buffer_csv(const Trajectory& trajectory, const fs::path& path) {
  auto out = open_out(path);
  out << kBufferCsvHeader << '\n';
  for (const auto& r : trajectory.steps) {
    for (std::size_t i = 0; i < r.snapshot.size(); ++i) {
      const auto& e = r.snapshot[i];
      out << r.step << ',' << i << ',' << num(e.proxy_norm) << ',' << num(e.true_norm) << ','
          << e.age << '\n';
    }
  }
  close_out(out, path);
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw IoError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  table.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.columns.size()) {
      throw IoError(path.string() + ": row has " + std::to_string(cells.size()) +
                    " fields, header has " + std::to_string(table.columns.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_cell(c, path));
    table.rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  return table;
}

std::vector<RunRow> read_run_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t step = t.column("step"), loss = t.column("loss"),
                    grad = t.column("grad_norm"), dist = t.column("dist_to_opt"),
                    size = t.column("buffer_size"), minp = t.column("buffer_min_proxy"),
                    mean_age = t.column("buffer_mean_age"), max_age = t.column("buffer_max_age"),
                    gc = t.column("gc_norm_mean"), gap = t.column("norm_gap");
  std::vector<RunRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    rows.push_back({static_cast<std::size_t>(r[step]), r[loss], r[grad], maybe(r[dist]),
                    static_cast<std::size_t>(r[size]), maybe(r[minp]), r[mean_age],
                    static_cast<std::size_t>(r[max_age]), r[gc], r[gap]});
  }
  return rows;
}

Summary summarize(const ExperimentConfig& config, double reference_loss,
                  const std::vector<std::vector<RunRow>>& rows) {
  Summary s{config.steps, config.seeds, reference_loss, {}, 0.0, 0.0, {}, config.threshold};
  const double tolerance = config.threshold * std::max(std::abs(reference_loss), 1.0);
  for (const auto& seed_rows : rows) {
    std::optional<std::size_t> reached;
    for (const auto& r : seed_rows) {
      if (r.loss - reference_loss <= tolerance) {
        reached = r.step + 1;
        break;
      }
    }
    s.steps_to_threshold.push_back(reached);
    if (!seed_rows.empty()) s.final_losses.push_back(seed_rows.back().loss);
  }
  if (!s.final_losses.empty()) {
    const double n = static_cast<double>(s.final_losses.size());
    double sum = 0.0;
    for (double x : s.final_losses) sum += x;
    s.final_loss_mean = sum / n;
    if (s.final_losses.size() > 1) {
      double ss = 0.0;
      for (double x : s.final_losses) ss += (x - s.final_loss_mean) * (x - s.final_loss_mean);
      s.final_loss_stddev = std::sqrt(ss / (n - 1.0));
    }
  }
  return s;
}

std::string to_json(const Summary& s) {
  json steps_to = json::array();
  for (const auto& x : s.steps_to_threshold) steps_to.push_back(x ? json(*x) : json(nullptr));
  const bool any = !s.final_losses.empty();
  json doc{
      {"steps", s.steps},
      {"seeds", s.seeds},
      {"reference_loss", s.reference_loss},
      {"final_losses", s.final_losses},
      {"final_loss_mean", any ? json(s.final_loss_mean) : json(nullptr)},
      {"final_loss_stddev", any ? json(s.final_loss_stddev) : json(nullptr)},
      {"threshold", s.threshold},
      {"steps_to_threshold", steps_to},
  };
  return doc.dump(2);
}

std::vector<SeedResult> run_seeds(const ExperimentConfig& config) {
  const Prepared p = prepare(config);
  std::vector<SeedResult> out;
  out.reserve(config.seeds.size());
  for (auto seed : config.seeds) {
    out.push_back(run_one(config, *p.problem, p.reference.theta, seed, RecordOptions{}));
  }
  return out;
}

Summary run(const ExperimentConfig& config) {
  const Prepared p = prepare(config);
  const fs::path dir(config.out);
  ensure_dir(dir);
  std::vector<std::vector<RunRow>> all;
  for (auto seed : config.seeds) {
    SeedResult r = run_one(config, *p.problem, p.reference.theta, seed, RecordOptions{});
    write_run_csv(r.rows, dir / fmt::format("run_seed{}.csv", seed));
    write_buffer_csv(r.trajectory, dir / fmt::format("buffer_seed{}.csv", seed));
    all.push_back(std::move(r.rows));
  }
  Summary s = summarize(config, p.reference.loss, all);
  write_text(dir / "summary.json", to_json(s));
  write_text(dir / "config.json", serialize_config(config));
  return s;
}

StalenessReport staleness_report(const CsvTable& buffer_rows) {
  const std::size_t age = buffer_rows.column("age");
  StalenessReport r;
  for (const auto& row : buffer_rows.rows) {
    if (!(row[age] >= 0.0)) throw IoError("csv: invalid age value");
    const auto a = static_cast<std::size_t>(row[age]);
    ++r.counts[a];
    r.max_age = std::max(r.max_age, a);
    ++r.samples;
  }
  return r;
}

StalenessReport staleness_report(const Trajectory& trajectory) {
  StalenessReport r;
  for (const auto& step : trajectory.steps) {
    for (const auto& e : step.snapshot) {
      ++r.counts[e.age];
      r.max_age = std::max(r.max_age, e.age);
      ++r.samples;
    }
  }
  return r;
}

namespace {

NormGapReport gap_summary(std::vector<double> series) {
  NormGapReport r{std::move(series), 0.0};
  const std::size_t n = r.series.size();
  if (n == 0) return r;
  const std::size_t start = n - std::max<std::size_t>(1, n / 4);
  double sum = 0.0;
  for (std::size_t i = start; i < n; ++i) sum += r.series[i];
  r.last_quartile_mean = sum / static_cast<double>(n - start);
  return r;
}

}  // namespace

NormGapReport norm_gap_report(const CsvTable& run_rows) {
  const std::size_t gc = run_rows.column("gc_norm_mean");
  const std::size_t grad = run_rows.column("grad_norm");
  std::vector<double> series;
  series.reserve(run_rows.rows.size());
  for (const auto& row : run_rows.rows) {
    series.push_back(row[gc] == 0.0 ? 0.0 : row[gc] - row[grad]);
  }
  return gap_summary(std::move(series));
}

NormGapReport norm_gap_report(const std::vector<RunRow>& rows) {
  std::vector<double> series;
  series.reserve(rows.size());
  for (const auto& r : rows) series.push_back(r.gc_norm_mean == 0.0 ? 0.0 : r.gc_norm_mean - r.grad_norm);
  return gap_summary(std::move(series));
}

std::vector<AblationRow> ablate(const ExperimentConfig& config, bool write) {
  const Prepared p = prepare(config);
  auto pick = [](const auto& list, auto fallback) {
    return list.empty() ? std::vector<decltype(fallback)>{fallback} : list;
  };
  const auto selections = pick(config.ablation.selections, config.buffer.selection);
  const auto replacements = pick(config.ablation.replacements, config.buffer.replacement);
  const auto aggregations = pick(config.ablation.aggregations, config.aggregation);

  std::vector<AblationRow> rows;
  for (auto sel : selections) {
    for (auto rep : replacements) {
      for (auto agg : aggregations) {
        ExperimentConfig cell = config;
        cell.buffer.selection = sel;
        cell.buffer.replacement = rep;
        cell.aggregation = agg;
        std::vector<std::vector<RunRow>> all;
        for (auto seed : cell.seeds) {
          RecordOptions record;
          record.weights = false;
          all.push_back(run_one(cell, *p.problem, p.reference.theta, seed, record).rows);
        }
        Summary s = summarize(cell, p.reference.loss, all);
        const double gap = s.final_losses.empty() ? 0.0 : relative_gap(s.final_loss_mean, s.reference_loss);
        rows.push_back({sel, rep, agg, std::move(s), gap});
      }
    }
  }
  auto key = [](const AblationRow& r) {
    return std::make_tuple(std::string(to_string(r.selection)), std::string(to_string(r.replacement)),
                           std::string(to_string(r.aggregation)));
  };
  std::sort(rows.begin(), rows.end(),
            [&](const AblationRow& a, const AblationRow& b) { return key(a) < key(b); });
  rows.erase(std::unique(rows.begin(), rows.end(),
                         [&](const AblationRow& a, const AblationRow& b) { return key(a) == key(b); }),
             rows.end());

  if (write) {
    const fs::path dir(config.out);
    ensure_dir(dir);
    const fs::path path = dir / "ablation.csv";
    auto out = open_out(path);
    out << "selection,replacement,aggregation,final_loss_mean,final_loss_stddev,reference_loss,"
           "relative_gap\n";
    for (const auto& r : rows) {
      out << to_string(r.selection) << ',' << to_string(r.replacement) << ','
          << to_string(r.aggregation) << ',' << num(r.summary.final_loss_mean) << ','
          << num(r.summary.final_loss_stddev) << ',' << num(r.summary.reference_loss) << ','
          << num(r.relative_gap) << '\n';
    }
    close_out(out, path);
  }
  return rows;
}

SimulationCheck simulate_check(const ExperimentConfig& config, std::uint64_t seed) {
  validate(config);
  if (config.problem.kind != "quadratic" || config.oracle.kind != "gaussian") {
    throw ConfigError("simulate: needs a quadratic problem with the gaussian oracle");
  }
  if (config.optimizer.rule != Rule::Sgd) {
    throw ConfigError("simulate: the linear system models the sgd rule only");
  }
  auto problem = std::dynamic_pointer_cast<const QuadraticProblem>(build_problem(config.problem));
  RecordOptions record;
  record.noise = true;
  record.theta = true;
  record.ages = false;
  const SeedResult r = run_one(config, *problem, std::nullopt, seed, record);

  const Vector& star = *problem->theta_star();
  const Vector r0 = initial_point(config, problem->dimension()) - star;
  const WeightSchedule schedule = schedule_from(r.trajectory);
  const std::vector<Vector> noise = noise_from(r.trajectory);
  const auto sim = simulate_system(problem->hessian(), schedule, config.optimizer.hyper.lr, r0,
                                   noise, config.steps);

  SimulationCheck out{{r0.norm()}, {r0.norm()}, 0.0, schedule.staleness()};
  for (std::size_t t = 0; t < config.steps; ++t) {
    const Vector rt = *r.trajectory.steps[t].theta - star;
    out.optimizer_norms.push_back(rt.norm());
    out.system_norms.push_back(sim[t + 1].norm());
    out.max_discrepancy = std::max(out.max_discrepancy, (rt - sim[t + 1]).norm());
  }
  return out;
}

void write_simulation_csv(const SimulationCheck& check, const fs::path& path) {
  auto out = open_out(path);
  out << "step,optimizer_norm,system_norm\n";
  for (std::size_t t = 0; t < check.optimizer_norms.size(); ++t) {
    out << t << ',' << num(check.optimizer_norms[t]) << ',' << num(check.system_norms[t]) << '\n';
  }
  close_out(out, path);
}

}  // namespace critgrad
