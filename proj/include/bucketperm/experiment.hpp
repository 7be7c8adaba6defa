#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bucketperm/config.hpp"
#include "bucketperm/embedding.hpp"
#include "bucketperm/engine.hpp"

namespace bucketperm {

struct DatasetOverview {
  ValidationReport validation;
  std::size_t buckets = 0;
  int classes = 0;
  std::vector<int> class_bucket_counts;
  BigCount m_total = 0;
  double p_min = 0.0;
};

DatasetOverview overview(const BucketedDataset& dataset);
nlohmann::json overview_json(const DatasetOverview& overview);
std::string overview_text(const DatasetOverview& overview);

struct RunControl {
  bool resume = false;  // reuse record files already in the output directory
  std::optional<std::size_t> max_new_evaluations;
  std::ostream* log = nullptr;  // one line per completed assignment
};

// The embedding a config asks for: loaded from its path, or fitted on the
// dataset (all units, or the training units of the configured split).
Embedding embedding_for(const ExperimentConfig& config, const BucketedDataset& dataset);

// Runs the configured test: cached_run when an embedding section is present,
// run_permutation_test otherwise.
TestReport execute(const ExperimentConfig& config, const BucketedDataset& dataset,
                   const EngineOptions& options);

// execute() plus output files: config.json, records/, and the report files
// once the run is complete.
TestReport run_experiment(const ExperimentConfig& config, const RunControl& control = {});

// Continues the run stored in output_dir (its config.json and records/).
TestReport resume_experiment(const std::filesystem::path& output_dir, const RunControl& control = {},
                             std::optional<std::size_t> workers = std::nullopt);

// Sweepable parameters: theta, mu_R, delta, trainer.kind.
ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& name,
                                const std::string& value);

struct SweepRow {
  std::string value;
  std::uint64_t master_seed = 0;
  TestReport report;
  double wall_seconds = 0.0;
};

// One full test per (value, seed); the first failure aborts the sweep. Each
// row's report files go to output_dir/<name>=<value>[/seed=<s>].
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& name,
                                const std::vector<std::string>& values,
                                const std::vector<std::uint64_t>& seeds, const RunControl& control = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace bucketperm
