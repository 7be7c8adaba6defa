#include "bucketperm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "bucketperm/error.hpp"

namespace bucketperm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::LabelDisagreement: return "LabelDisagreement";
    case ErrorCode::EmptyBucket: return "EmptyBucket";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::UncoveredBucket: return "UncoveredBucket";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::MTooLarge: return "MTooLarge";
    case ErrorCode::EmptyNull: return "EmptyNull";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::BucketTooSmall: return "BucketTooSmall";
    case ErrorCode::TooFewBuckets: return "TooFewBuckets";
    case ErrorCode::ClassAbsent: return "ClassAbsent";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::StaleEmbedding: return "StaleEmbedding";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TrainerFailed: return "TrainerFailed";
  }
  return "Unknown";
}

int BucketedDataset::num_classes() const {
  int k = 0;
  for (int label : bucket_labels) k = std::max(k, label);
  return k;
}

std::vector<std::size_t> BucketedDataset::bucket_sizes() const {
  std::vector<std::size_t> sizes(num_buckets(), 0);
  for (std::size_t b : bucket_of) {
    if (b < sizes.size()) ++sizes[b];
  }
  return sizes;
}

std::vector<int> BucketedDataset::class_bucket_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(std::max(num_classes(), 0)), 0);
  for (int label : bucket_labels) {
    if (label >= 1) ++counts[static_cast<std::size_t>(label - 1)];
  }
  return counts;
}

std::vector<std::vector<std::size_t>> BucketedDataset::bucket_members() const {
  std::vector<std::vector<std::size_t>> members(num_buckets());
  for (std::size_t i = 0; i < bucket_of.size(); ++i) members[bucket_of[i]].push_back(i);
  return members;
}

std::optional<std::size_t> BucketedDataset::find_bucket(const std::string& bucket_id) const {
  auto it = std::find(bucket_ids.begin(), bucket_ids.end(), bucket_id);
  if (it == bucket_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - bucket_ids.begin());
}

namespace {

std::string_view issue_name(IssueKind kind) {
  switch (kind) {
    case IssueKind::RowCountMismatch: return "RowCountMismatch";
    case IssueKind::DuplicateUnitId: return "DuplicateUnitId";
    case IssueKind::BucketIndexOutOfRange: return "BucketIndexOutOfRange";
    case IssueKind::EmptyBucket: return "EmptyBucket";
    case IssueKind::LabelOutOfRange: return "LabelOutOfRange";
    case IssueKind::ClassWithoutBucket: return "ClassWithoutBucket";
    case IssueKind::SingleClass: return "SingleClass";
    case IssueKind::NonFinite: return "NonFinite";
    case IssueKind::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

}  // namespace

std::string ValidationIssue::describe() const {
  std::string out(issue_name(kind));
  if (kind == IssueKind::NonFinite) {
    out += "(" + std::to_string(row) + "," + std::to_string(col) + ")";
  }
  if (!detail.empty()) out += ": " + detail;
  return out;
}

bool ValidationReport::contains(IssueKind kind) const {
  return std::any_of(issues.begin(), issues.end(),
                     [kind](const ValidationIssue& i) { return i.kind == kind; });
}

ValidationReport validate(const BucketedDataset& ds) {
  ValidationReport report;
  auto add = [&](IssueKind kind, std::string detail, std::size_t row = 0, std::size_t col = 0) {
    report.issues.push_back({kind, row, col, std::move(detail)});
  };

  const std::size_t n = ds.num_units();
  if (ds.unit_ids.size() != n || ds.bucket_of.size() != n) {
    add(IssueKind::RowCountMismatch, "features have " + std::to_string(n) + " rows, unit_ids " +
                                         std::to_string(ds.unit_ids.size()) + ", bucket_of " +
                                         std::to_string(ds.bucket_of.size()));
  }
  if (ds.bucket_ids.size() != ds.num_buckets()) {
    add(IssueKind::RowCountMismatch, "bucket_ids and bucket_labels differ in length");
  }

  std::unordered_set<std::string> seen;
  for (const auto& id : ds.unit_ids) {
    if (!seen.insert(id).second) add(IssueKind::DuplicateUnitId, id);
  }

  std::vector<std::size_t> sizes(ds.num_buckets(), 0);
  for (std::size_t i = 0; i < ds.bucket_of.size(); ++i) {
    if (ds.bucket_of[i] >= ds.num_buckets()) {
      add(IssueKind::BucketIndexOutOfRange, "unit " + std::to_string(i), i);
    } else {
      ++sizes[ds.bucket_of[i]];
    }
  }
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    if (sizes[b] == 0) {
      add(IssueKind::EmptyBucket, b < ds.bucket_ids.size() ? ds.bucket_ids[b] : std::to_string(b),
          b);
    }
  }

  const int k = ds.num_classes();
  std::vector<int> per_class(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (std::size_t b = 0; b < ds.num_buckets(); ++b) {
    int label = ds.bucket_labels[b];
    if (label < 1) {
      add(IssueKind::LabelOutOfRange, "bucket " + std::to_string(b) + " has label " +
                                          std::to_string(label), b);
    } else {
      ++per_class[static_cast<std::size_t>(label - 1)];
    }
  }
  for (int c = 1; c <= k; ++c) {
    if (per_class[static_cast<std::size_t>(c - 1)] == 0) {
      add(IssueKind::ClassWithoutBucket, "class " + std::to_string(c));
    }
  }
  if (std::count_if(per_class.begin(), per_class.end(), [](int c) { return c > 0; }) < 2) {
    add(IssueKind::SingleClass, "fewer than two classes label a bucket");
  }

  for (std::size_t r = 0; r < n; ++r) {
    auto row = ds.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) add(IssueKind::NonFinite, "", r, c);
    }
  }

  if (ds.shape && ds.shape->size() != ds.num_features()) {
    add(IssueKind::ShapeMismatch, "image shape does not match feature count");
  }
  if (!ds.feature_names.empty() && ds.feature_names.size() != ds.num_features()) {
    add(IssueKind::ShapeMismatch, "feature_names length does not match feature count");
  }
  return report;
}

void require_valid(const BucketedDataset& ds) {
  auto report = validate(ds);
  if (report.ok()) return;
  const auto& first = report.issues.front();
  switch (first.kind) {
    case IssueKind::EmptyBucket: throw Error(ErrorCode::EmptyBucket, first.describe());
    case IssueKind::SingleClass: throw Error(ErrorCode::SingleClass, first.describe());
    default: throw Error(ErrorCode::InvalidDataset, first.describe());
  }
}

nlohmann::json dataset_summary(const BucketedDataset& ds) {
  nlohmann::json buckets = nlohmann::json::array();
  auto sizes = ds.bucket_sizes();
  for (std::size_t b = 0; b < ds.num_buckets(); ++b) {
    buckets.push_back({{"id", ds.bucket_ids[b]}, {"size", sizes[b]}, {"label", ds.bucket_labels[b]}});
  }
  nlohmann::json out{{"schema_version", 1},
                     {"N", ds.num_units()},
                     {"D", ds.num_features()},
                     {"B", ds.num_buckets()},
                     {"K", ds.num_classes()},
                     {"class_bucket_counts", ds.class_bucket_counts()},
                     {"buckets", buckets}};
  if (ds.shape) {
    out["image"] = {{"height", ds.shape->height},
                    {"width", ds.shape->width},
                    {"channels", ds.shape->channels}};
  }
  return out;
}

void write_dataset_summary(const BucketedDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << dataset_summary(ds).dump(2) << '\n';
}

BucketedDataset group_classes(const BucketedDataset& ds,
                              const std::map<std::string, int>& class_of_bucket) {
  std::vector<int> raw(ds.num_buckets());
  std::set<int> distinct;
  for (std::size_t b = 0; b < ds.num_buckets(); ++b) {
    auto it = class_of_bucket.find(ds.bucket_ids[b]);
    if (it == class_of_bucket.end()) throw Error(ErrorCode::UncoveredBucket, ds.bucket_ids[b]);
    raw[b] = it->second;
    distinct.insert(it->second);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorCode::SingleClass, "class grouping maps every bucket to one class");
  }
  std::map<int, int> renumber;
  BucketedDataset out = ds;
  out.class_names.clear();
  for (int value : distinct) {
    renumber[value] = static_cast<int>(renumber.size()) + 1;
    out.class_names.push_back(std::to_string(value));
  }
  for (std::size_t b = 0; b < raw.size(); ++b) out.bucket_labels[b] = renumber[raw[b]];
  return out;
}

}  // namespace bucketperm
