// critgrad: command-line front end for the critical-gradient library.
//
//   critgrad rate --alpha 0.1 --K 2 --mu 1 --L 10 --sigma2 1
//   critgrad train --config exp.json --seed 3 --out results
//
// Exit status: 0 success, 2 configuration error, 3 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "critgrad/config.hpp"
#include "critgrad/errors.hpp"
#include "critgrad/harness.hpp"
#include "critgrad/theory.hpp"

namespace fs = std::filesystem;
using namespace critgrad;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> topc;
  std::optional<double> decay;
  std::string aggr;
  std::string optimizer;
  std::string select;
  std::string replace;
  std::string out;
};

void add_experiment_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "Experiment config (JSON)");
  cmd.add_option("--seed", o.seed, "Run a single seed");
  cmd.add_option("--steps", o.steps, "Optimizer steps");
  cmd.add_option("--topc", o.topc, "Buffer capacity");
  cmd.add_option("--decay", o.decay, "Proxy-norm decay factor in [0, 1)");
  cmd.add_option("--aggr", o.aggr, "Aggregation")
      ->check(CLI::IsMember({"mean", "sum", "min", "max", "median"}));
  cmd.add_option("--optimizer", o.optimizer, "Update rule")
      ->check(CLI::IsMember({"sgd", "sgdm", "rmsprop", "adam"}));
  cmd.add_option("--select", o.select, "Buffer admission strategy")
      ->check(CLI::IsMember({"koth", "bottomc", "fifo", "cointoss", "mnds", "cds", "css"}));
  cmd.add_option("--replace", o.replace, "Eviction strategy")
      ->check(CLI::IsMember({"minproxy", "random", "ncpr"}));
  cmd.add_option("--out", o.out, "Output directory");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.steps) c.steps = *o.steps;
  if (o.topc) c.buffer.topc = *o.topc;
  if (o.decay) c.buffer.decay = *o.decay;
  if (!o.aggr.empty()) c.aggregation = *parse_aggregation(o.aggr);
  if (!o.optimizer.empty()) c.optimizer.rule = *parse_rule(o.optimizer);
  if (!o.select.empty()) c.buffer.selection = *parse_selection(o.select);
  if (!o.replace.empty()) c.buffer.replacement = *parse_replacement(o.replace);
  if (!o.out.empty()) c.out = o.out;
  validate(c);
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string histogram_csv(const StalenessReport& r) {
  std::string text = "age,count\n";
  for (const auto& [age, count] : r.counts) text += fmt::format("{},{}\n", age, count);
  return text;
}

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--topcs: '" + item + "' is not a nonnegative integer");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-augmented optimizers with critical-gradient buffers"};
  app.require_subcommand(1);

  RateQuery query{0.1, 1, 1.0, 10.0};
  double sigma2 = 1.0;
  std::string rate_out;
  auto* rate = app.add_subcommand("rate", "Worst-case rates and variance bound");
  rate->add_option("--alpha", query.alpha, "Step size")->required();
  rate->add_option("--K", query.K, "Staleness bound")->required();
  rate->add_option("--mu", query.mu, "Strong convexity")->required();
  rate->add_option("--L", query.L, "Smoothness")->required();
  rate->add_option("--sigma2", sigma2, "Gradient noise variance");
  rate->add_option("--out", rate_out, "Write the report here instead of stdout");

  Overrides o;
  std::string input;
  std::string topcs;
  auto* simulate = app.add_subcommand("simulate", "Replay a run through the linear system");
  auto* train = app.add_subcommand("train", "Run an experiment");
  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep buffer strategies");
  auto* staleness = app.add_subcommand("staleness", "Histogram of buffer ages");
  auto* normgap = app.add_subcommand("normgap", "Mean buffer norm minus current norm");
  for (auto* cmd : {simulate, train, ablate_cmd, staleness, normgap}) add_experiment_flags(*cmd, o);
  staleness->add_option("--input", input, "Existing buffer_seed<N>.csv instead of a new run");
  normgap->add_option("--input", input, "Existing run_seed<N>.csv instead of a new run");
  normgap->add_option("--topcs", topcs, "Comma-separated capacities to compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*rate) {
      const RateReport report = make_rate_report(query, sigma2);
      const std::string text = to_json(report) + "\n";
      if (rate_out.empty()) {
        std::cout << text;
      } else {
        write_file(rate_out, text);
      }
      return 0;
    }

    if (*simulate) {
      const ExperimentConfig c = resolve(o);
      const SimulationCheck check = simulate_check(c, c.seeds.front());
      ensure_dir(c.out);
      write_simulation_csv(check, fs::path(c.out) / "simulation.csv");
      std::cout << fmt::format("staleness K = {}\nmax discrepancy = {:.3e}\n", check.staleness,
                               check.max_discrepancy);
      return 0;
    }

    if (*train) {
      const Summary s = run(resolve(o));
      std::cout << to_json(s) << '\n';
      return 0;
    }

    if (*ablate_cmd) {
      ExperimentConfig c = resolve(o);
      auto& m = c.ablation;
      if (m.selections.empty() && m.replacements.empty() && m.aggregations.empty()) {
        if (o.select.empty()) {
          m.selections = {Selection::KingOfTheHill, Selection::BottomC,
                          Selection::Fifo,          Selection::CoinToss,
                          Selection::MeanNormDiversity, Selection::CosineDiversity,
                          Selection::CosineSimilarity};
        }
        if (o.replace.empty()) {
          m.replacements = {Replacement::MinProxy, Replacement::Random,
                            Replacement::NormControlled};
        }
      }
      for (const auto& r : critgrad::ablate(c)) {
        std::cout << fmt::format("{:<10} {:<9} {:<7} final {:.6g}  gap {:+.3e}\n",
                                 to_string(r.selection), to_string(r.replacement),
                                 to_string(r.aggregation), r.summary.final_loss_mean,
                                 r.relative_gap);
      }
      return 0;
    }

    if (*staleness) {
      StalenessReport report;
      fs::path dir;
      if (!input.empty()) {
        report = staleness_report(read_csv(input));
        dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
      } else {
        const ExperimentConfig c = resolve(o);
        for (const auto& r : run_seeds(c)) {
          const StalenessReport one = staleness_report(r.trajectory);
          for (const auto& [age, count] : one.counts) report.counts[age] += count;
          report.max_age = std::max(report.max_age, one.max_age);
          report.samples += one.samples;
        }
        dir = c.out;
      }
      ensure_dir(dir);
      write_file(dir / "staleness.csv", histogram_csv(report));
      std::cout << fmt::format("samples {}  max age {}\n", report.samples, report.max_age);
      return 0;
    }

    if (*normgap) {
      if (!input.empty()) {
        const NormGapReport r = norm_gap_report(read_csv(input));
        std::cout << fmt::format("last-quartile mean gap {:.17g}\n", r.last_quartile_mean);
        return 0;
      }
      ExperimentConfig c = resolve(o);
      const std::vector<std::size_t> caps =
          topcs.empty() ? std::vector<std::size_t>{c.buffer.topc} : parse_list(topcs);
      std::string series = "topc,seed,step,gap\n";
      std::string summary = "topc,seed,last_quartile_mean\n";
      for (std::size_t cap : caps) {
        c.buffer.topc = cap;
        for (const auto& r : run_seeds(c)) {
          const NormGapReport g = norm_gap_report(r.rows);
          for (std::size_t t = 0; t < g.series.size(); ++t) {
            series += fmt::format("{},{},{},{:.17g}\n", cap, r.seed, t, g.series[t]);
          }
          summary += fmt::format("{},{},{:.17g}\n", cap, r.seed, g.last_quartile_mean);
          std::cout << fmt::format("topc {:>3} seed {}  last-quartile mean gap {:.6g}\n", cap,
                                   r.seed, g.last_quartile_mean);
        }
      }
      ensure_dir(c.out);
      write_file(fs::path(c.out) / "normgap.csv", series);
      write_file(fs::path(c.out) / "normgap_summary.csv", summary);
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
