#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "bucketperm/assignment.hpp"
#include "bucketperm/error.hpp"
#include "oracles.hpp"

using namespace bucketperm;

namespace {

BigCount count(std::vector<int> c) { return count_unique_assignments(c); }

// All class-count vectors with K >= 2 nonzero classes and B <= max_b.
std::vector<std::vector<int>> count_vectors(int max_b) {
  std::vector<std::vector<int>> out;
  for (int k = 2; k <= 4; ++k) {
    std::vector<int> c(k, 1);
    while (true) {
      int b = 0;
      for (int x : c) b += x;
      if (b <= max_b) out.push_back(c);
      int pos = k - 1;
      while (pos >= 0) {
        ++c[pos];
        int s = 0;
        for (int x : c) s += x;
        if (s <= max_b) break;
        c[pos] = 1;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  return out;
}

LabelAssignment observed_for(const std::vector<int>& counts) {
  LabelAssignment a;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (int i = 0; i < counts[k]; ++i) a.labels.push_back(static_cast<int>(k) + 1);
  }
  return a;
}

}  // namespace

TEST_CASE("count_unique_assignments against reported resolutions") {
  CHECK(count({5, 5}) == 252);
  CHECK(count({7, 8}) == 6435);
  CHECK(count({2, 3}) == 10);
  CHECK(count({3, 7}) == 120);
  CHECK(count({1, 1}) == 2);
  CHECK(count({3, 3}) == 20);
  CHECK(count({2, 2, 2}) == 90);
  // Beyond 64 bits: C(100, 50).
  CHECK(count({50, 50}) == BigCount("100891344545564193334812497256"));
  CHECK_THROWS_AS(count({}), Error);
  CHECK_THROWS_AS(count({3, 0}), Error);
}

TEST_CASE("enumeration matches a brute-force filter for every B <= 8") {
  for (const auto& counts : count_vectors(8)) {
    CAPTURE(counts);
    const auto expected = oracle::brute_force_universe(counts);
    const auto got = enumerate_assignments(observed_for(counts));
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].labels == expected[i]);
    CHECK(count_unique_assignments(counts) == oracle::multinomial(counts));
  }
}

TEST_CASE("enumeration size equals the count up to B = 12") {
  for (const auto& counts : count_vectors(12)) {
    if (counts.size() > 3) continue;
    std::size_t n = 0;
    AssignmentEnumerator e(observed_for(counts));
    LabelAssignment a;
    while (e.next(a)) ++n;
    CHECK(BigCount(n) == count_unique_assignments(counts));
  }
}

TEST_CASE("enumeration starts from the sorted multiset whatever the observed order") {
  const auto got = enumerate_assignments(LabelAssignment{{2, 1, 1}});
  REQUIRE(got.size() == 3);
  CHECK(got[0].labels == std::vector<int>{1, 1, 2});
  CHECK(got[1].labels == std::vector<int>{1, 2, 1});
  CHECK(got[2].labels == std::vector<int>{2, 1, 1});
  CHECK(enumerate_assignments(LabelAssignment{{1, 2}}).size() == 2);
  CHECK(enumerate_assignments(LabelAssignment{{1, 1, 1}}).size() == 1);
}

TEST_CASE("canonical keys are injective and parse back") {
  std::set<std::string> keys;
  const auto all = enumerate_assignments(observed_for({2, 2, 3}));
  for (const auto& a : all) {
    keys.insert(a.canonical_key());
    CHECK(assignment_from_key(a.canonical_key()) == a);
  }
  CHECK(keys.size() == all.size());
  // Multi-digit class ids must not collide with concatenations.
  CHECK(LabelAssignment{{1, 11}}.canonical_key() != LabelAssignment{{11, 1}}.canonical_key());
  CHECK(LabelAssignment{{1, 12}}.canonical_key() != LabelAssignment{{11, 2}}.canonical_key());
}

TEST_CASE("rank and unrank are inverse to lexicographic position") {
  const std::vector<int> counts{2, 3, 2};
  const auto all = enumerate_assignments(observed_for(counts));
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(rank_assignment(all[i]) == i);
    CHECK(unrank_assignment(counts, i) == all[i]);
  }
}

TEST_CASE("sampling: forced inclusion, exhaustion and errors") {
  const auto observed = LabelAssignment{{2, 1, 2, 1, 1, 2}};
  const auto one = sample_assignments(observed, 1, 7);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == observed);

  auto full = sample_assignments(observed, 20, 7);
  CHECK(full[0] == observed);
  std::set<LabelAssignment> a(full.begin(), full.end());
  const auto all = enumerate_assignments(observed);
  std::set<LabelAssignment> b(all.begin(), all.end());
  CHECK(a == b);

  CHECK_THROWS_AS(sample_assignments(observed, 21, 7), Error);
  CHECK_THROWS_AS(sample_assignments(observed, 0, 7), Error);

  const auto x = sample_assignments(observed, 10, 1);
  const auto y = sample_assignments(observed, 10, 2);
  CHECK(x[0] == observed);
  CHECK(y[0] == observed);
  CHECK(x != y);
  CHECK(sample_assignments(observed, 10, 1) == x);
}

TEST_CASE("sampling without replacement is uniform over the universe") {
  const auto observed = LabelAssignment{{1, 1, 1, 2, 2, 2}};
  std::map<std::string, int> freq;
  const int repeats = 1000;
  for (int r = 0; r < repeats; ++r) {
    const auto s = sample_assignments(observed, 10, 1000 + static_cast<std::uint64_t>(r));
    std::set<std::string> distinct;
    for (const auto& a : s) distinct.insert(a.canonical_key());
    CHECK(distinct.size() == 10);
    for (const auto& a : s) ++freq[a.canonical_key()];
  }
  CHECK(freq.size() == 20);
  // Each of the 19 non-observed vectors fills one of 9 free slots.
  const double p = 9.0 / 19.0;
  const double mu = repeats * p;
  const double sd = std::sqrt(repeats * p * (1 - p));
  double chi2 = 0.0;
  for (const auto& [key, n] : freq) {
    if (key == observed.canonical_key()) {
      CHECK(n == repeats);
      continue;
    }
    CHECK(std::abs(n - mu) <= 3 * sd);
    chi2 += (n - mu) * (n - mu) / (mu * (1 - p));
  }
  // 99.9% point of chi-square with 18 degrees of freedom.
  CHECK(chi2 < 42.31);
}

TEST_CASE("sampling from a universe beyond 64 bits") {
  LabelAssignment observed = observed_for({40, 40});
  const auto s = sample_assignments(observed, 50, 3);
  CHECK(s.size() == 50);
  CHECK(s[0] == observed);
  std::set<LabelAssignment> distinct(s.begin(), s.end());
  CHECK(distinct.size() == 50);
  for (const auto& a : s) CHECK(a.class_counts(2) == std::vector<int>{40, 40});
}
