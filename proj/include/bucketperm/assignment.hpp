#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace bucketperm {

using BigCount = boost::multiprecision::cpp_int;

// One class id per bucket. Two assignments are the same null-universe element
// iff their label vectors are equal; canonical_key() is injective over vectors.
struct LabelAssignment {
  std::vector<int> labels;

  std::string canonical_key() const;
  std::vector<int> class_counts(int num_classes) const;

  auto operator<=>(const LabelAssignment&) const = default;
};

LabelAssignment assignment_from_key(std::string_view key);

// Multinomial B! / (n_1! ... n_K!), exact.
BigCount count_unique_assignments(std::span<const int> class_counts);

// Streams every distinct label vector with the observed class multiset exactly
// once, in lexicographic order.
class AssignmentEnumerator {
 public:
  explicit AssignmentEnumerator(const LabelAssignment& observed);
  bool next(LabelAssignment& out);

 private:
  std::vector<int> current_;
  bool done_ = false;
};

std::vector<LabelAssignment> enumerate_assignments(const LabelAssignment& observed);

// Position of the assignment in the lexicographic enumeration of its multiset.
BigCount rank_assignment(const LabelAssignment& assignment);
LabelAssignment unrank_assignment(std::span<const int> class_counts, const BigCount& rank);

// m distinct assignments drawn uniformly without replacement from the universe.
// The observed assignment is always element 0; the rest follow in random order.
std::vector<LabelAssignment> sample_assignments(const LabelAssignment& observed, std::uint64_t m,
                                                std::uint64_t seed);

}  // namespace bucketperm
