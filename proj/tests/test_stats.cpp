#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bucketperm/assignment.hpp"
#include "bucketperm/error.hpp"
#include "bucketperm/rng.hpp"
#include "bucketperm/stats.hpp"
#include "oracles.hpp"

using namespace bucketperm;

namespace {

// Null over the first statistics.size() vectors of the (5,5) universe; the
// observed assignment is entry 0.
NullDistribution make_null(const std::vector<double>& statistics, RunMode mode = RunMode::exhaustive()) {
  const auto all = enumerate_assignments(LabelAssignment{{1, 1, 1, 1, 1, 2, 2, 2, 2, 2}});
  NullDistribution null;
  null.mode = mode;
  null.m_total = 252;
  for (std::size_t i = 0; i < statistics.size(); ++i) {
    null.entries.push_back({all[i].canonical_key(), statistics[i]});
  }
  return null;
}

}  // namespace

TEST_CASE("fisher_p_value by direct count") {
  const auto p = fisher_p_value(0.99, make_null({0.99, 0.60, 0.55, 0.58}, RunMode::monte_carlo(4, 0)));
  CHECK(p.count == 1);
  CHECK(p.total == 4);
  CHECK(p.value == 0.25);
  CHECK(p.p_min == doctest::Approx(1.0 / 252));

  CHECK(fisher_p_value(0.5, make_null({0.5, 0.5, 0.5}, RunMode::monte_carlo(3, 0))).value == 1.0);
}

TEST_CASE("strict maximum over the full (5,5) universe gives 1/252") {
  std::vector<double> stats(252, 0.4);
  stats[0] = 0.95;
  const auto p = fisher_p_value(0.95, make_null(stats));
  CHECK(p.count == 1);
  CHECK(p.total == 252);
  CHECK(p.value == p.p_min);
  CHECK(p.value == doctest::Approx(0.0040).epsilon(0.01));
}

TEST_CASE("ties count toward the numerator") {
  const auto p = fisher_p_value(0.8, make_null({0.8, 0.8, 0.3, 0.9}, RunMode::monte_carlo(4, 0)));
  CHECK(p.count == 3);
}

TEST_CASE("agreement with the definition on random nulls, and monotonicity in T_obs") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(252));
    std::vector<double> stats(n);
    for (double& s : stats) s = static_cast<double>(rng.below(11)) / 10.0;
    const double t_obs = stats[0];
    const auto null = make_null(stats, n == 252 ? RunMode::exhaustive() : RunMode::monte_carlo(n, 0));
    const auto p = fisher_p_value(t_obs, null);
    CHECK(p.value == oracle::direct_p(t_obs, stats));
    CHECK(p.value >= 1.0 / static_cast<double>(n));
    CHECK(p.value <= 1.0);
    if (n == 252) CHECK(p.value >= p.p_min);
    const double higher = std::min(1.0, t_obs + 0.1);
    auto raised = stats;
    raised[0] = higher;
    CHECK(fisher_p_value(higher, make_null(raised, null.mode)).value <= p.value);
  }
}

TEST_CASE("fisher_p_value rejects malformed nulls") {
  NullDistribution empty;
  CHECK_THROWS_AS(fisher_p_value(0.5, empty), Error);
  auto missing = make_null({0.5, 0.4});
  missing.contains_observed = false;
  CHECK_THROWS_AS(fisher_p_value(0.5, missing), Error);
  CHECK_THROWS_AS(fisher_p_value(0.5, make_null({0.5, 1.5})), Error);
  auto dup = make_null({0.5, 0.4});
  dup.entries[1].key = dup.entries[0].key;
  CHECK_THROWS_AS(fisher_p_value(0.5, dup), Error);
}

TEST_CASE("convergence trace") {
  const auto t = convergence_trace(std::vector<double>{0.9, 0.1, 0.2, 0.3}, 0.9);
  REQUIRE(t.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(t[k].evaluated == k + 1);
    CHECK(t[k].p == doctest::Approx(1.0 / static_cast<double>(k + 1)));
  }
  for (const auto& point : convergence_trace(std::vector<double>(7, 0.6), 0.6)) CHECK(point.p == 1.0);

  Rng rng(4);
  std::vector<double> stats(60);
  for (double& s : stats) s = rng.uniform();
  auto other = stats;
  rng.shuffle(std::span<double>(other));
  CHECK(convergence_trace(stats, 0.5).back().p == convergence_trace(other, 0.5).back().p);
  CHECK(convergence_trace(stats, 0.5).back().p == oracle::direct_p(0.5, stats));
}

TEST_CASE("null histogram uses 100 bins of width 0.01") {
  const auto h = null_histogram(std::vector<double>{0.0, 0.005, 0.01, 0.29, 0.3, 0.999, 1.0});
  REQUIRE(h.size() == 100);
  CHECK(h[0].count == 2);
  CHECK(h[1].count == 1);
  CHECK(h[28].count == 0);
  CHECK(h[29].count == 1);
  CHECK(h[30].count == 1);
  CHECK(h[99].count == 2);
  CHECK(h[37].lower == doctest::Approx(0.37));
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  CHECK(total == 7);
}

TEST_CASE("to_double on large counts") {
  CHECK(to_double(BigCount(252)) == 252.0);
  const BigCount big = count_unique_assignments(std::vector<int>{50, 50});
  CHECK(to_double(big) == doctest::Approx(1.0089134454556419e29));
}
