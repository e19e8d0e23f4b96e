#include "critgrad/buffer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace critgrad {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::pair<std::string_view, Enum>, N>& table,
                           std::string_view name) {
  for (const auto& [key, value] : table)
    if (key == name) return value;
  return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view reverse_lookup(const std::array<std::pair<std::string_view, Enum>, N>& table,
                                Enum value) {
  for (const auto& [key, v] : table)
    if (v == value) return key;
  return "?";
}

constexpr std::array<std::pair<std::string_view, AggregationMode>, 5> kAggregationNames{{
    {"mean", AggregationMode::Mean},
    {"sum", AggregationMode::Sum},
    {"min", AggregationMode::MinNormOnly},
    {"max", AggregationMode::MaxNormOnly},
    {"median", AggregationMode::MedianNormOnly},
}};

constexpr std::array<std::pair<std::string_view, Selection>, 7> kSelectionNames{{
    {"koth", Selection::KingOfTheHill},
    {"bottomc", Selection::BottomC},
    {"fifo", Selection::Fifo},
    {"cointoss", Selection::CoinToss},
    {"mnds", Selection::MeanNormDiversity},
    {"cds", Selection::CosineDiversity},
    {"css", Selection::CosineSimilarity},
}};

constexpr std::array<std::pair<std::string_view, Replacement>, 3> kReplacementNames{{
    {"minproxy", Replacement::MinProxy},
    {"random", Replacement::Random},
    {"ncpr", Replacement::NormControlled},
}};

double cosine(const Vector& a, double norm_a, const Vector& b, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (norm_a * norm_b), -1.0, 1.0);
}

}  // namespace

std::string_view to_string(AggregationMode mode) { return reverse_lookup(kAggregationNames, mode); }
std::string_view to_string(Selection selection) { return reverse_lookup(kSelectionNames, selection); }
std::string_view to_string(Replacement replacement) {
  return reverse_lookup(kReplacementNames, replacement);
}
std::optional<AggregationMode> parse_aggregation(std::string_view name) {
  return lookup(kAggregationNames, name);
}
std::optional<Selection> parse_selection(std::string_view name) {
  return lookup(kSelectionNames, name);
}
std::optional<Replacement> parse_replacement(std::string_view name) {
  return lookup(kReplacementNames, name);
}

double current_gradient_weight(AggregationMode mode, std::size_t size) noexcept {
  if (size == 0) return 1.0;
  switch (mode) {
    case AggregationMode::Mean:
      return 1.0 / static_cast<double>(size + 1);
    case AggregationMode::Sum:
      return 1.0;
    case AggregationMode::MinNormOnly:
    case AggregationMode::MaxNormOnly:
    case AggregationMode::MedianNormOnly:
      return 0.5;
  }
  return 1.0;
}

CriticalBuffer::CriticalBuffer(std::size_t capacity, double decay, Selection selection,
                               Replacement replacement, RandomState rng)
    : capacity_(capacity),
      decay_(decay),
      selection_(selection),
      replacement_(replacement),
      rng_(rng) {
  if (!(decay >= 0.0 && decay < 1.0)) {
    throw std::invalid_argument("CriticalBuffer: decay must lie in [0, 1)");
  }
  entries_.reserve(capacity);
}

bool CriticalBuffer::offer(const Vector& g, std::size_t step) {
  if (!entries_.empty()) require_same_dimension(entries_.front().gradient, g, "CriticalBuffer::offer");
  if (capacity_ == 0) return false;

  const double norm = g.norm();
  if (!full()) {
    entries_.push_back({g, norm, norm, step});
    return true;
  }
  if (!admit(g, norm)) return false;

  const std::size_t victim = choose_victim();
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  entries_.push_back({g, norm, norm, step});
  return true;
}

bool CriticalBuffer::admit(const Vector& g, double norm) {
  switch (selection_) {
    case Selection::KingOfTheHill:
      return norm > *min_proxy();
    case Selection::BottomC: {
      double largest = 0.0;
      for (const auto& e : entries_) largest = std::max(largest, e.proxy_norm);
      return norm < largest;
    }
    case Selection::Fifo:
      return true;
    case Selection::CoinToss:
      return rng_.bernoulli(0.5);
    case Selection::MeanNormDiversity: {
      const double mean = mean_true_norm();
      const double score = std::abs(norm - mean);
      double scale = score;
      for (const auto& e : entries_) scale = std::max(scale, std::abs(e.true_norm - mean));
      // All norms equal: no diversity signal, fall back to a fair coin.
      const double p = scale > 0.0 ? score / scale : 0.5;
      return rng_.bernoulli(p);
    }
    case Selection::CosineDiversity:
    case Selection::CosineSimilarity: {
      double similarity = 0.0;
      for (const auto& e : entries_) similarity += cosine(g, norm, e.gradient, e.true_norm);
      similarity /= static_cast<double>(entries_.size());
      const double p = selection_ == Selection::CosineSimilarity ? 0.5 * (1.0 + similarity)
                                                                  : 0.5 * (1.0 - similarity);
      return rng_.bernoulli(p);
    }
  }
  return false;
}

std::size_t CriticalBuffer::choose_victim() {
  if (selection_ == Selection::Fifo) return 0;

  switch (replacement_) {
    case Replacement::MinProxy: {
      // BottomC keeps a min-heap, so its root is the largest proxy. Ties go
      // to the oldest entry.
      const bool evict_largest = selection_ == Selection::BottomC;
      std::size_t victim = 0;
      for (std::size_t i = 1; i < entries_.size(); ++i) {
        const double p = entries_[i].proxy_norm;
        const double best = entries_[victim].proxy_norm;
        if (evict_largest ? p > best : p < best) victim = i;
      }
      return victim;
    }
    case Replacement::Random:
      return rng_.uniform_index(entries_.size());
    case Replacement::NormControlled: {
      double total = 0.0;
      for (const auto& e : entries_) total += e.true_norm;
      if (total <= 0.0) return rng_.uniform_index(entries_.size());
      const double target = rng_.uniform() * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        cumulative += entries_[i].true_norm;
        if (target < cumulative) return i;
      }
      return entries_.size() - 1;
    }
  }
  return 0;
}

void CriticalBuffer::decay_all() noexcept {
  for (auto& e : entries_) e.proxy_norm *= decay_;
}

std::vector<WeightedGradient> CriticalBuffer::entries_and_weights(AggregationMode mode) const {
  std::vector<WeightedGradient> out;
  if (entries_.empty()) return out;

  const std::size_t n = entries_.size();
  switch (mode) {
    case AggregationMode::Mean:
    case AggregationMode::Sum: {
      const double w = mode == AggregationMode::Mean ? 1.0 / static_cast<double>(n + 1)
                                                     : 1.0 / static_cast<double>(n);
      out.reserve(n);
      for (const auto& e : entries_) out.push_back({&e.gradient, e.inserted_at, w});
      return out;
    }
    case AggregationMode::MinNormOnly:
    case AggregationMode::MaxNormOnly:
    case AggregationMode::MedianNormOnly: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return entries_[a].true_norm < entries_[b].true_norm;
      });
      std::size_t pick = order[(n - 1) / 2];  // lower median
      if (mode == AggregationMode::MinNormOnly) pick = order.front();
      if (mode == AggregationMode::MaxNormOnly) pick = order.back();
      const auto& e = entries_[pick];
      out.push_back({&e.gradient, e.inserted_at, 0.5});
      return out;
    }
  }
  return out;
}

std::vector<std::size_t> CriticalBuffer::ages(std::size_t now) const {
  std::vector<std::size_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (now < e.inserted_at) {
      throw std::invalid_argument("CriticalBuffer::ages: now precedes an insertion step");
    }
    out.push_back(now - e.inserted_at);
  }
  return out;
}

std::optional<double> CriticalBuffer::min_proxy() const noexcept {
  if (entries_.empty()) return std::nullopt;
  double smallest = entries_.front().proxy_norm;
  for (const auto& e : entries_) smallest = std::min(smallest, e.proxy_norm);
  return smallest;
}

double CriticalBuffer::mean_true_norm() const noexcept {
  if (entries_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : entries_) total += e.true_norm;
  return total / static_cast<double>(entries_.size());
}

}  // namespace critgrad
