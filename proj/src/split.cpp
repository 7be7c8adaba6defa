#include <algorithm>
#include <cmath>

#include "bucketperm/error.hpp"
#include "bucketperm/trainers.hpp"

namespace bucketperm {

std::string_view to_string(SplitProtocol protocol) {
  switch (protocol) {
    case SplitProtocol::within_bucket_stratified: return "within_bucket_stratified";
    case SplitProtocol::bucket_holdout: return "bucket_holdout";
  }
  return "unknown";
}

SplitProtocol split_protocol_from_string(std::string_view name) {
  if (name == "within_bucket_stratified") return SplitProtocol::within_bucket_stratified;
  if (name == "bucket_holdout") return SplitProtocol::bucket_holdout;
  throw Error(ErrorCode::InvalidSpec, "unknown split protocol: " + std::string(name));
}

namespace {

Split within_bucket(const BucketedDataset& ds, const SplitSpec& spec) {
  Split split;
  auto members = ds.bucket_members();
  for (std::size_t b = 0; b < members.size(); ++b) {
    auto& units = members[b];
    const std::size_t n = units.size();
    if (n < 2) {
      throw Error(ErrorCode::BucketTooSmall, ds.bucket_ids[b] + " has " + std::to_string(n) + " unit(s)");
    }
    auto take = static_cast<std::size_t>(std::ceil(spec.test_fraction * static_cast<double>(n) - 1e-12));
    take = std::clamp<std::size_t>(take, 1, n - 1);
    Rng rng(derive_seed(spec.seed, "split/" + ds.bucket_ids[b]));
    rng.shuffle(std::span<std::size_t>(units));
    split.test.insert(split.test.end(), units.begin(), units.begin() + static_cast<long>(take));
    split.train.insert(split.train.end(), units.begin() + static_cast<long>(take), units.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split bucket_holdout(const BucketedDataset& ds, const SplitSpec& spec) {
  const std::size_t b_total = ds.num_buckets();
  const auto k = static_cast<std::size_t>(ds.num_classes());
  if (b_total < 2 * k) {
    throw Error(ErrorCode::TooFewBuckets, std::to_string(b_total) + " buckets for " +
                                              std::to_string(k) + " classes");
  }
  auto counts = ds.class_bucket_counts();
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] < 2) {
      throw Error(ErrorCode::TooFewBuckets, "class " + std::to_string(c + 1) + " has one bucket");
    }
  }
  auto target = static_cast<std::size_t>(std::lround(spec.test_fraction * static_cast<double>(b_total)));
  target = std::clamp(target, k, b_total - k);

  std::vector<std::size_t> order(b_total);
  for (std::size_t b = 0; b < b_total; ++b) order[b] = b;
  Rng rng(derive_seed(spec.seed, "holdout"));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<bool> in_test(b_total, false);
  std::vector<bool> reserved(b_total, false);
  std::vector<int> test_seen(k, 0);
  std::vector<int> train_seen(k, 0);
  std::size_t chosen = 0;
  for (std::size_t b : order) {
    auto c = static_cast<std::size_t>(ds.bucket_labels[b] - 1);
    if (!test_seen[c]) {
      test_seen[c] = 1;
      in_test[b] = true;
      ++chosen;
    } else if (!train_seen[c]) {
      train_seen[c] = 1;
      reserved[b] = true;
    }
  }
  for (std::size_t b : order) {
    if (chosen >= target) break;
    if (in_test[b] || reserved[b]) continue;
    in_test[b] = true;
    ++chosen;
  }

  Split split;
  for (std::size_t i = 0; i < ds.num_units(); ++i) {
    (in_test[ds.bucket_of[i]] ? split.test : split.train).push_back(i);
  }
  return split;
}

}  // namespace

Split make_split(const BucketedDataset& ds, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "test_fraction must lie in (0, 1)");
  }
  return spec.protocol == SplitProtocol::within_bucket_stratified ? within_bucket(ds, spec)
                                                                   : bucket_holdout(ds, spec);
}

}  // namespace bucketperm
