#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "critgrad/numerics.hpp"
#include "critgrad/random.hpp"

namespace critgrad {

/// How the current gradient is combined with the buffer contents.
enum class AggregationMode { Mean, Sum, MinNormOnly, MaxNormOnly, MedianNormOnly };

/// Admission rule applied when the buffer is full. A buffer that is not full
/// admits every offered gradient, whatever the rule.
enum class Selection {
  KingOfTheHill,      // admit iff ‖g‖ > smallest proxy (strict)
  BottomC,            // admit iff ‖g‖ < largest proxy (strict)
  Fifo,               // always admit, evict the oldest
  CoinToss,           // admit with probability 1/2
  MeanNormDiversity,  // p ∝ |‖g‖ - mean true norm|
  CosineDiversity,    // p ∝ 1 - mean cosine similarity
  CosineSimilarity,   // p ∝ 1 + mean cosine similarity
};

/// Eviction rule once a gradient has been admitted into a full buffer.
/// Ignored by Selection::Fifo, which always evicts the oldest entry.
enum class Replacement {
  MinProxy,        // the heap root: smallest proxy (largest for BottomC)
  Random,          // uniform
  NormControlled,  // entry k with probability ‖g_k‖ / Σ‖g_i‖ (true norms)
};

std::string_view to_string(AggregationMode mode);
std::string_view to_string(Selection selection);
std::string_view to_string(Replacement replacement);
std::optional<AggregationMode> parse_aggregation(std::string_view name);
std::optional<Selection> parse_selection(std::string_view name);
std::optional<Replacement> parse_replacement(std::string_view name);

/// A stored gradient. `true_norm` is fixed at insertion; `proxy_norm` starts
/// equal to it and only ever shrinks under decay.
struct GradientEntry {
  Vector gradient;
  double proxy_norm;
  double true_norm;
  std::size_t inserted_at;
};

/// One buffer entry as it participates in an aggregate.
struct WeightedGradient {
  const Vector* gradient;
  std::size_t source_step;
  double weight;
};

/// Weight the aggregate gives the current gradient for a buffer of `size`.
double current_gradient_weight(AggregationMode mode, std::size_t size) noexcept;

/// Fixed-capacity memory of critical gradients with decaying priorities.
///
/// Entries are kept in insertion order. Capacity 0 is legal: nothing is ever
/// stored and every optimizer built on top behaves like its vanilla form.
class CriticalBuffer {
 public:
  CriticalBuffer(std::size_t capacity, double decay,
                 Selection selection = Selection::KingOfTheHill,
                 Replacement replacement = Replacement::MinProxy,
                 RandomState rng = RandomState(0));

  /// Offer gradient `g` observed at `step`; returns whether it was stored.
  /// Throws std::invalid_argument when the dimension differs from stored
  /// entries.
  bool offer(const Vector& g, std::size_t step);

  /// Multiply every proxy norm by the decay factor. Gradients are untouched.
  void decay_all() noexcept;

  /// Buffer entries with the weight `mode` assigns them, in insertion order.
  /// The single-entry modes return only the chosen entry.
  std::vector<WeightedGradient> entries_and_weights(AggregationMode mode) const;

  /// now - inserted_at per entry, in insertion order.
  std::vector<std::size_t> ages(std::size_t now) const;

  std::span<const GradientEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool full() const noexcept { return entries_.size() >= capacity_; }
  std::size_t capacity() const noexcept { return capacity_; }
  double decay() const noexcept { return decay_; }
  Selection selection() const noexcept { return selection_; }
  Replacement replacement() const noexcept { return replacement_; }

  /// Smallest proxy norm, or nullopt when empty.
  std::optional<double> min_proxy() const noexcept;
  /// Mean of the stored true norms, 0 when empty.
  double mean_true_norm() const noexcept;

 private:
  bool admit(const Vector& g, double norm);
  std::size_t choose_victim();

  std::size_t capacity_;
  double decay_;
  Selection selection_;
  Replacement replacement_;
  RandomState rng_;
  std::vector<GradientEntry> entries_;
};

}  // namespace critgrad
