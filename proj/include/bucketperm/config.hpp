#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "bucketperm/dataset.hpp"
#include "bucketperm/stats.hpp"
#include "bucketperm/trainers.hpp"

namespace bucketperm {

inline constexpr int kConfigSchemaVersion = 1;

struct EmbeddingSpec {
  std::size_t dim = 16;
  bool fit_on_train_only = false;
  std::uint64_t seed = 0;
  std::filesystem::path path;  // pre-fitted embedding file; empty: fit at run time
};

// A parsed experiment. `dataset` is the normalised dataset section: every
// default filled in and every path absolute, so it alone reproduces the data.
struct ExperimentConfig {
  nlohmann::json dataset;
  std::map<std::string, int> class_grouping;
  SplitSpec split;
  TrainerSpec trainer;
  RunMode mode = RunMode::exhaustive();
  std::uint64_t budget_cap = 10000;
  std::uint64_t master_seed = 0;
  std::optional<EmbeddingSpec> embedding;
  std::filesystem::path output_dir = "bucketperm_out";
  std::size_t workers = 0;  // 0: hardware concurrency

  // Split and sampling seeds follow master_seed unless set explicitly.
  bool split_seed_from_master = true;
  bool mode_seed_from_master = true;

  void set_master_seed(std::uint64_t seed);
};

// Relative paths resolve against base_dir. Unknown keys, wrong types and
// missing files are ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything that determines the report (execution knobs excluded).
nlohmann::json effective_config(const ExperimentConfig& config);
// effective_config plus output_dir and workers.
nlohmann::json full_config(const ExperimentConfig& config);

std::size_t resolved_workers(const ExperimentConfig& config);

// Loads or generates the dataset, applies the class grouping, then any cue.
BucketedDataset build_dataset(const ExperimentConfig& config);

}  // namespace bucketperm
