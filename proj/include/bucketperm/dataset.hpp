#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bucketperm/matrix.hpp"

namespace bucketperm {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

// N units partitioned into B buckets; every bucket carries one class id in 1..K.
// The unit label is never stored: it is always bucket_labels[bucket_of[i]].
struct BucketedDataset {
  Matrix features;                       // N x D
  std::vector<std::string> unit_ids;     // N, unique
  std::vector<std::size_t> bucket_of;    // N, values in [0, B)
  std::vector<std::string> bucket_ids;   // B, opaque
  std::vector<int> bucket_labels;        // B, values in 1..K
  std::vector<std::string> class_names;  // K or empty; class_names[k-1] names class k
  std::vector<std::string> feature_names;  // D or empty
  std::optional<ImageShape> shape;       // channel-major planes when channels > 1

  std::size_t num_units() const { return features.rows(); }
  std::size_t num_features() const { return features.cols(); }
  std::size_t num_buckets() const { return bucket_labels.size(); }
  int num_classes() const;
  int unit_label(std::size_t i) const { return bucket_labels[bucket_of[i]]; }

  std::vector<std::size_t> bucket_sizes() const;
  // Number of buckets per class, indexed by class id - 1.
  std::vector<int> class_bucket_counts() const;
  std::vector<std::vector<std::size_t>> bucket_members() const;
  std::optional<std::size_t> find_bucket(const std::string& bucket_id) const;

  bool operator==(const BucketedDataset&) const = default;
};

enum class IssueKind {
  RowCountMismatch,
  DuplicateUnitId,
  BucketIndexOutOfRange,
  EmptyBucket,
  LabelOutOfRange,
  ClassWithoutBucket,
  SingleClass,
  NonFinite,
  ShapeMismatch,
};

struct ValidationIssue {
  IssueKind kind;
  std::size_t row = 0;
  std::size_t col = 0;
  std::string detail;

  std::string describe() const;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool contains(IssueKind kind) const;
};

// Lists every violated invariant; empty iff the dataset is valid.
ValidationReport validate(const BucketedDataset& dataset);
// Throws Error (EmptyBucket, SingleClass or InvalidDataset) on the first issue.
void require_valid(const BucketedDataset& dataset);

struct DatasetSchema {
  enum class LabelSource { unit_column, bucket_table };

  std::vector<std::string> feature_columns;  // empty: every column not named below
  std::string unit_id_column = "unit_id";    // empty: ids are generated from row numbers
  std::string bucket_id_column = "bucket_id";
  LabelSource label_source = LabelSource::unit_column;
  std::string label_column = "label";
  std::filesystem::path bucket_label_table;  // used with LabelSource::bucket_table
  char delimiter = ',';
};

// Bucket indices follow first appearance of bucket ids in the file. Integer
// labels are mapped to class ids 1..K in ascending order of their value.
BucketedDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema);
void write_csv(const BucketedDataset& dataset, const std::filesystem::path& path,
               char delimiter = ',');

nlohmann::json dataset_summary(const BucketedDataset& dataset);
void write_dataset_summary(const BucketedDataset& dataset, const std::filesystem::path& path);

// IDX image/label pair. Each distinct label value becomes one bucket, ordered by
// value, initially labelled with its own class (identity grouping).
BucketedDataset load_idx_images(const std::filesystem::path& image_path,
                                const std::filesystem::path& label_path);
// Inverse of load_idx_images for single-channel data; bucket ids must be integers 0..255.
void write_idx_images(const BucketedDataset& dataset, const std::filesystem::path& image_path,
                      const std::filesystem::path& label_path);

// Replaces bucket labels; class ids in the map are renumbered 1..K by ascending value.
BucketedDataset group_classes(const BucketedDataset& dataset,
                              const std::map<std::string, int>& class_of_bucket);

}  // namespace bucketperm
