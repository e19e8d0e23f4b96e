#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "critgrad/buffer.hpp"
#include "gen.hpp"

using namespace critgrad;

namespace {

constexpr Selection kSelections[] = {
    Selection::KingOfTheHill,     Selection::BottomC,         Selection::Fifo,
    Selection::CoinToss,          Selection::MeanNormDiversity, Selection::CosineDiversity,
    Selection::CosineSimilarity};
constexpr Replacement kReplacements[] = {Replacement::MinProxy, Replacement::Random,
                                         Replacement::NormControlled};

std::vector<double> proxies(const CriticalBuffer& b) {
  std::vector<double> out;
  for (const auto& e : b.entries()) out.push_back(e.proxy_norm);
  return out;
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

/// Proxies {2.7, 1.8}: norms 3 and 2 offered into capacity 2, then one decay.
CriticalBuffer example_buffer() {
  CriticalBuffer b(2, 0.9);
  b.offer(Vector{3.0, 0.0}, 0);
  b.offer(Vector{0.0, 2.0}, 1);
  b.decay_all();
  return b;
}

}  // namespace

TEST_CASE("offer on a non-full buffer accepts") {
  CriticalBuffer b(2, 0.9);
  CHECK(b.offer(Vector{3.0, 0.0}, 0));
  CHECK(b.size() == 1);
  CHECK(b.entries()[0].proxy_norm == 3.0);
  CHECK(b.entries()[0].true_norm == 3.0);
}

TEST_CASE("KOTH admits on strictly larger norm and evicts the smallest proxy") {
  CriticalBuffer b = example_buffer();
  CHECK(proxies(b) == std::vector<double>{3.0 * 0.9, 2.0 * 0.9});
  CHECK(b.offer(Vector{2.0, 0.0}, 2));
  CHECK(sorted(proxies(b)) == sorted({3.0 * 0.9, 2.0}));

  CriticalBuffer tie = example_buffer();
  CHECK_FALSE(tie.offer(Vector{0.0, 2.0 * 0.9}, 2));
  CHECK(proxies(tie) == std::vector<double>{3.0 * 0.9, 2.0 * 0.9});
}

TEST_CASE("decay_all") {
  CriticalBuffer b(2, 0.9);
  b.offer(Vector{3.0}, 0);
  b.offer(Vector{2.0}, 1);
  b.decay_all();
  CHECK(proxies(b) == std::vector<double>{3.0 * 0.9, 2.0 * 0.9});
  CHECK(b.entries()[0].gradient == Vector{3.0});
  CHECK(b.entries()[0].true_norm == 3.0);

  CriticalBuffer z(3, 0.0);
  z.offer(Vector{1.0}, 0);
  z.offer(Vector{5.0}, 1);
  z.decay_all();
  CHECK(proxies(z) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("entries_and_weights") {
  CriticalBuffer b(4, 0.9);
  CHECK(b.entries_and_weights(AggregationMode::Mean).empty());
  b.offer(Vector{1.0}, 0);
  b.offer(Vector{2.0}, 1);
  for (const auto& w : b.entries_and_weights(AggregationMode::Mean)) CHECK(w.weight == 1.0 / 3.0);
  b.offer(Vector{3.0}, 2);
  b.offer(Vector{4.0}, 3);
  const auto sum = b.entries_and_weights(AggregationMode::Sum);
  REQUIRE(sum.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(sum[i].weight == 0.25);
    CHECK(sum[i].source_step == i);
  }
  CHECK(current_gradient_weight(AggregationMode::Mean, 4) == 0.2);
  CHECK(current_gradient_weight(AggregationMode::Sum, 4) == 1.0);
  CHECK(current_gradient_weight(AggregationMode::MedianNormOnly, 4) == 0.5);
  CHECK(current_gradient_weight(AggregationMode::Mean, 0) == 1.0);
  CHECK(current_gradient_weight(AggregationMode::MinNormOnly, 0) == 1.0);
}

TEST_CASE("single-entry modes pick min, max and lower median by true norm") {
  CriticalBuffer b(4, 0.5);
  for (double n : {3.0, 1.0, 4.0, 2.0}) b.offer(Vector{n}, static_cast<std::size_t>(n));
  b.decay_all();
  const auto pick = [&](AggregationMode m) {
    const auto w = b.entries_and_weights(m);
    REQUIRE(w.size() == 1);
    CHECK(w[0].weight == 0.5);
    return (*w[0].gradient)[0];
  };
  CHECK(pick(AggregationMode::MinNormOnly) == 1.0);
  CHECK(pick(AggregationMode::MaxNormOnly) == 4.0);
  CHECK(pick(AggregationMode::MedianNormOnly) == 2.0);
}

TEST_CASE("ages") {
  CriticalBuffer b(3, 0.9);
  b.offer(Vector{1.0}, 5);
  b.offer(Vector{1.0}, 9);
  CHECK(b.ages(12) == std::vector<std::size_t>{7, 3});
  b.offer(Vector{1.0}, 12);
  CHECK(b.ages(12).back() == 0);
  CHECK_THROWS_AS(b.ages(4), std::invalid_argument);
}

TEST_CASE("capacity 0 stores nothing") {
  for (Selection s : kSelections) {
    CriticalBuffer b(0, 0.9, s);
    CHECK_FALSE(b.offer(Vector{5.0}, 0));
    CHECK(b.empty());
    CHECK_FALSE(b.min_proxy().has_value());
  }
}

TEST_CASE("invalid construction and dimension mismatch") {
  CHECK_THROWS_AS(CriticalBuffer(2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CriticalBuffer(2, -0.1), std::invalid_argument);
  CriticalBuffer b(2, 0.9);
  b.offer(Vector{1.0, 2.0}, 0);
  CHECK_THROWS_AS(b.offer(Vector{1.0}, 1), std::invalid_argument);
}

TEST_CASE("FIFO evicts the oldest entry") {
  CriticalBuffer b(2, 0.9, Selection::Fifo, Replacement::MinProxy);
  b.offer(Vector{1.0}, 0);
  b.offer(Vector{9.0}, 1);
  CHECK(b.offer(Vector{0.5}, 2));
  REQUIRE(b.size() == 2);
  CHECK(b.entries()[0].inserted_at == 1);
  CHECK(b.entries()[1].inserted_at == 2);
}

TEST_CASE("BottomC admits on strictly smaller norm than the largest proxy") {
  CriticalBuffer b(2, 0.9, Selection::BottomC, Replacement::MinProxy);
  b.offer(Vector{3.0}, 0);
  b.offer(Vector{2.0}, 1);
  CHECK_FALSE(b.offer(Vector{3.0}, 2));
  CHECK_FALSE(b.offer(Vector{4.0}, 3));
  CHECK(b.offer(Vector{1.0}, 4));
  CHECK(sorted(proxies(b)) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("name round trips") {
  for (Selection s : kSelections) CHECK(parse_selection(to_string(s)) == s);
  for (Replacement r : kReplacements) CHECK(parse_replacement(to_string(r)) == r);
  for (AggregationMode m : {AggregationMode::Mean, AggregationMode::Sum, AggregationMode::MinNormOnly,
                            AggregationMode::MaxNormOnly, AggregationMode::MedianNormOnly}) {
    CHECK(parse_aggregation(to_string(m)) == m);
  }
  CHECK_FALSE(parse_selection("nope").has_value());
  CHECK(to_string(Selection::KingOfTheHill) == "koth");
  CHECK(to_string(Replacement::NormControlled) == "ncpr");
}

TEST_CASE("property: structural invariants for every strategy") {
  gen::Source src(201);
  for (Selection s : kSelections) {
    for (Replacement r : kReplacements) {
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t cap = src.index(0, 6);
        const double d = src.uniform(0.0, 0.999);
        CriticalBuffer b(cap, d, s, r, RandomState(src.index(0, 1000)));
        for (std::size_t t = 0; t < 60; ++t) {
          const bool was_full = b.full();
          const std::size_t before = b.size();
          const std::vector<double> old = proxies(b);
          const bool accepted = b.offer(src.vector(3, src.uniform(0.1, 5.0)), t);
          if (!was_full) CHECK(accepted);
          CHECK(b.size() <= cap);
          CHECK(b.size() == std::min(cap, before + (accepted ? 1 : 0)));
          if (!accepted) CHECK(proxies(b) == old);
          b.decay_all();
          for (const auto& e : b.entries()) {
            CHECK(e.proxy_norm >= 0.0);
            CHECK(e.proxy_norm <= e.true_norm);
            CHECK(e.true_norm == e.gradient.norm());
            CHECK(e.proxy_norm == doctest::Approx(e.true_norm * std::pow(d, t - e.inserted_at + 1))
                                      .epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("property: KOTH/MinProxy matches a brute-force reference") {
  gen::Source src(202);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t cap = src.index(0, 5);
    const double d = src.uniform(0.0, 0.99);
    CriticalBuffer b(cap, d);
    // Reference: plain list of (proxy, step); evict the first minimum.
    std::vector<std::pair<double, std::size_t>> ref;
    const std::size_t steps = src.index(1, 40);
    for (std::size_t t = 0; t < steps; ++t) {
      // Coarse norms make ties common.
      const double norm = src.coin() ? static_cast<double>(src.index(1, 4)) : src.uniform(0.0, 4.0);
      const Vector g = norm == 0.0 ? Vector{0.0} : Vector{norm};
      bool expect = false;
      if (cap > 0) {
        if (ref.size() < cap) {
          expect = true;
          ref.push_back({norm, t});
        } else {
          auto victim = ref.begin();
          for (auto it = ref.begin(); it != ref.end(); ++it)
            if (it->first < victim->first) victim = it;
          if (norm > victim->first) {
            expect = true;
            ref.erase(victim);
            ref.push_back({norm, t});
          }
        }
      }
      CHECK(b.offer(g, t) == expect);
      b.decay_all();
      for (auto& e : ref) e.first *= d;
      std::vector<double> want;
      for (const auto& e : ref) want.push_back(e.first);
      CHECK(proxies(b) == want);
    }
  }
}

TEST_CASE("property: KOTH residency bound for norms in [m, M]") {
  gen::Source src(203);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t cap = src.index(1, 8);
    const double d = src.uniform(0.5, 0.99);
    const double m = src.uniform(0.1, 2.0);
    const double M = m * src.uniform(1.0, 20.0);
    const auto bound = static_cast<std::size_t>(std::ceil(std::log(m / M) / std::log(d))) + cap;
    CriticalBuffer b(cap, d);
    std::size_t worst = 0;
    for (std::size_t t = 0; t < 400; ++t) {
      b.offer(src.with_norm(2, src.uniform(m, M)), t);
      b.decay_all();
      for (std::size_t a : b.ages(t)) worst = std::max(worst, a);
    }
    CHECK(worst <= bound);
  }
}

TEST_CASE("constant-norm stream under KOTH keeps every age within 1 + capacity") {
  gen::Source src(204);
  for (std::size_t cap = 1; cap <= 10; ++cap) {
    for (double d : {0.5, 0.7, 0.9, 0.99}) {
      CriticalBuffer b(cap, d);
      for (std::size_t t = 0; t < 300; ++t) {
        b.offer(src.with_norm(4, 2.5), t);
        b.decay_all();
        for (std::size_t a : b.ages(t)) CHECK(a <= 1 + cap);
      }
    }
  }
}

TEST_CASE("property: stochastic strategies are reproducible under a fixed seed") {
  gen::Source src(205);
  std::vector<Vector> stream;
  for (int i = 0; i < 200; ++i) stream.push_back(src.vector(3, src.uniform(0.1, 3.0)));
  for (Selection s : kSelections) {
    for (Replacement r : kReplacements) {
      CriticalBuffer a(4, 0.9, s, r, RandomState(77));
      CriticalBuffer b(4, 0.9, s, r, RandomState(77));
      for (std::size_t t = 0; t < stream.size(); ++t) {
        CHECK(a.offer(stream[t], t) == b.offer(stream[t], t));
        a.decay_all();
        b.decay_all();
      }
      CHECK(proxies(a) == proxies(b));
    }
  }
}

TEST_CASE("CoinToss admits about half the time") {
  CriticalBuffer b(1, 0.9, Selection::CoinToss, Replacement::MinProxy, RandomState(8));
  b.offer(Vector{1.0}, 0);
  int accepted = 0;
  const int n = 20000;
  for (int t = 1; t <= n; ++t) accepted += b.offer(Vector{1.0}, static_cast<std::size_t>(t));
  CHECK(std::abs(accepted / static_cast<double>(n) - 0.5) < 5.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("CSS favours aligned gradients and CDS opposed ones") {
  auto rate = [](Selection s, const Vector& g) {
    CriticalBuffer b(1, 0.9, s, Replacement::MinProxy, RandomState(9));
    b.offer(Vector{1.0, 0.0}, 0);
    int accepted = 0;
    for (std::size_t t = 1; t <= 2000; ++t) {
      if (b.offer(g, t)) {
        ++accepted;
        b = CriticalBuffer(1, 0.9, s, Replacement::MinProxy, RandomState(9 + t));
        b.offer(Vector{1.0, 0.0}, t);
      }
    }
    return accepted;
  };
  CHECK(rate(Selection::CosineSimilarity, Vector{1.0, 0.0}) == 2000);
  CHECK(rate(Selection::CosineSimilarity, Vector{-1.0, 0.0}) == 0);
  CHECK(rate(Selection::CosineDiversity, Vector{-1.0, 0.0}) == 2000);
  CHECK(rate(Selection::CosineDiversity, Vector{1.0, 0.0}) == 0);
}

TEST_CASE("NCPR eviction frequency follows true norms") {
  RandomState rs(10);
  std::vector<int> evicted(2, 0);  // by index: norm 1, norm 3
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CriticalBuffer k(2, 0.9, Selection::KingOfTheHill, Replacement::NormControlled, rs.fork(i));
    k.offer(Vector{1.0}, 0);
    k.offer(Vector{3.0}, 1);
    k.offer(Vector{10.0}, 2);
    ++evicted[k.entries()[0].inserted_at == 0 ? 1 : 0];
  }
  CHECK(std::abs(evicted[1] / static_cast<double>(n) - 0.75) < 0.02);
}
