#include "bucketperm/assignment.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <unordered_set>

#include "bucketperm/error.hpp"
#include "bucketperm/rng.hpp"

namespace bucketperm {
namespace {

int max_label(const std::vector<int>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

}  // namespace

std::string LabelAssignment::canonical_key() const {
  std::string key;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) key += '.';
    key += std::to_string(labels[i]);
  }
  return key;
}

std::vector<int> LabelAssignment::class_counts(int num_classes) const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : labels) {
    if (label < 1 || label > num_classes) {
      throw Error(ErrorCode::InvalidCounts, "label " + std::to_string(label) + " outside 1.." +
                                                std::to_string(num_classes));
    }
    ++counts[static_cast<std::size_t>(label - 1)];
  }
  return counts;
}

LabelAssignment assignment_from_key(std::string_view key) {
  LabelAssignment out;
  while (!key.empty()) {
    auto dot = key.find('.');
    auto part = key.substr(0, dot);
    int v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw Error(ErrorCode::InvalidSpec, "malformed assignment key");
    }
    out.labels.push_back(v);
    if (dot == std::string_view::npos) break;
    key.remove_prefix(dot + 1);
  }
  return out;
}

BigCount count_unique_assignments(std::span<const int> class_counts) {
  if (class_counts.empty()) throw Error(ErrorCode::InvalidCounts, "no classes");
  BigCount total = 1;
  long placed = 0;
  for (int n : class_counts) {
    if (n < 1) throw Error(ErrorCode::InvalidCounts, "class count " + std::to_string(n));
    // Multiply by C(placed + n, n) one factor at a time; each prefix is exact.
    for (int j = 1; j <= n; ++j) {
      total *= placed + j;
      total /= j;
    }
    placed += n;
  }
  return total;
}

AssignmentEnumerator::AssignmentEnumerator(const LabelAssignment& observed)
    : current_(observed.labels) {
  std::sort(current_.begin(), current_.end());
}

bool AssignmentEnumerator::next(LabelAssignment& out) {
  if (done_) return false;
  out.labels = current_;
  done_ = !std::next_permutation(current_.begin(), current_.end());
  return true;
}

std::vector<LabelAssignment> enumerate_assignments(const LabelAssignment& observed) {
  std::vector<LabelAssignment> all;
  AssignmentEnumerator it(observed);
  LabelAssignment a;
  while (it.next(a)) all.push_back(a);
  return all;
}

namespace {

// Multinomial of a count vector that may contain zeros.
BigCount multinomial(const std::vector<int>& counts) {
  std::vector<int> positive;
  for (int c : counts) {
    if (c > 0) positive.push_back(c);
  }
  if (positive.empty()) return 1;
  return count_unique_assignments(positive);
}

}  // namespace

BigCount rank_assignment(const LabelAssignment& assignment) {
  const int k = max_label(assignment.labels);
  std::vector<int> remaining = assignment.class_counts(k);
  BigCount rank = 0;
  for (int label : assignment.labels) {
    for (int v = 1; v < label; ++v) {
      auto& c = remaining[static_cast<std::size_t>(v - 1)];
      if (c == 0) continue;
      --c;
      rank += multinomial(remaining);
      ++c;
    }
    --remaining[static_cast<std::size_t>(label - 1)];
  }
  return rank;
}

LabelAssignment unrank_assignment(std::span<const int> class_counts, const BigCount& rank) {
  std::vector<int> remaining(class_counts.begin(), class_counts.end());
  if (rank < 0 || rank >= multinomial(remaining)) {
    throw Error(ErrorCode::InvalidCounts, "rank outside the assignment universe");
  }
  int b = 0;
  for (int c : remaining) b += c;
  BigCount r = rank;
  LabelAssignment out;
  for (int pos = 0; pos < b; ++pos) {
    for (std::size_t v = 0; v < remaining.size(); ++v) {
      if (remaining[v] == 0) continue;
      --remaining[v];
      BigCount block = multinomial(remaining);
      if (r < block) {
        out.labels.push_back(static_cast<int>(v) + 1);
        break;
      }
      r -= block;
      ++remaining[v];
    }
  }
  return out;
}

std::vector<LabelAssignment> sample_assignments(const LabelAssignment& observed, std::uint64_t m,
                                                std::uint64_t seed) {
  const int k = max_label(observed.labels);
  const auto counts = observed.class_counts(k);
  std::vector<int> positive;
  for (int c : counts) {
    if (c > 0) positive.push_back(c);
  }
  const BigCount total = count_unique_assignments(positive);
  if (m == 0) throw Error(ErrorCode::InvalidSpec, "sample count must be at least 1");
  if (BigCount(m) > total) {
    throw Error(ErrorCode::MTooLarge, std::to_string(m) + " > " + total.str());
  }

  Rng rng(seed);
  std::vector<LabelAssignment> out{observed};
  out.reserve(static_cast<std::size_t>(m));

  if (total <= BigCount(std::numeric_limits<std::int64_t>::max())) {
    // Floyd's algorithm over ranks [0, total - 1), shifted past the observed rank.
    const auto others = static_cast<std::uint64_t>(total) - 1;
    const auto observed_rank = static_cast<std::uint64_t>(rank_assignment(observed));
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::uint64_t> order;
    for (std::uint64_t j = others - (m - 1); j < others; ++j) {
      std::uint64_t t = rng.below(j + 1);
      std::uint64_t pick = chosen.count(t) ? j : t;
      chosen.insert(pick);
      order.push_back(pick);
    }
    rng.shuffle(std::span<std::uint64_t>(order));
    for (std::uint64_t r : order) {
      out.push_back(unrank_assignment(counts, BigCount(r < observed_rank ? r : r + 1)));
    }
    return out;
  }

  // Universe too large for 64-bit ranks: a uniform shuffle of the observed
  // vector is uniform over distinct vectors, so rejection of repeats suffices.
  std::unordered_set<std::string> seen{observed.canonical_key()};
  LabelAssignment candidate = observed;
  while (out.size() < m) {
    rng.shuffle(std::span<int>(candidate.labels));
    if (seen.insert(candidate.canonical_key()).second) out.push_back(candidate);
  }
  return out;
}

}  // namespace bucketperm
