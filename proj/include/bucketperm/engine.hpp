#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bucketperm/assignment.hpp"
#include "bucketperm/dataset.hpp"
#include "bucketperm/stats.hpp"
#include "bucketperm/trainers.hpp"

namespace bucketperm {

struct AssignmentRecord {
  std::string key;
  double statistic = 0.0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct TestReport {
  double t_obs = 0.0;
  PValue p;
  std::size_t evaluated = 0;
  RunMode mode;
  std::string observed_key;
  std::vector<int> class_counts;
  std::vector<TracePoint> convergence;
  std::vector<AssignmentRecord> records;  // evaluation order
  std::string trainer_init{kInitScheme};
  double embed_seconds = 0.0;
  double permutation_seconds = 0.0;
  bool complete = true;
};

struct EngineOptions {
  std::size_t workers = 1;
  std::uint64_t budget_cap = 10000;  // exhaustive mode only
  // One record file per assignment; existing records are reused on resume.
  std::optional<std::filesystem::path> record_dir;
  // Stop after this many fresh evaluations (the report is then incomplete).
  std::optional<std::size_t> max_new_evaluations;
  // Called after each completed assignment with the running completed count.
  std::function<void(std::size_t done, std::size_t total, const AssignmentRecord&)> on_complete;
};

using AssignmentEvaluator = std::function<double(const LabelAssignment&, std::uint64_t seed)>;

// Per-assignment training seed: a stable hash of (master seed, canonical key),
// so a statistic never depends on evaluation order.
std::uint64_t assignment_seed(std::uint64_t master_seed, const std::string& key);

// The evaluated set, in evaluation order: lexicographic for exhaustive mode,
// observed-first sampling order for Monte Carlo.
std::vector<LabelAssignment> select_assignments(const LabelAssignment& observed, const RunMode& mode,
                                                std::uint64_t budget_cap);

// Core fold: evaluates each selected assignment (concurrently when workers > 1)
// and aggregates by key. Evaluator failures abort the test; the error reported
// is the one with the lowest evaluation index, tagged with its key.
TestReport run_assignments(const LabelAssignment& observed, const AssignmentEvaluator& evaluate,
                           const RunMode& mode, std::uint64_t master_seed,
                           const EngineOptions& options = {});

TestReport run_permutation_test(const BucketedDataset& dataset, const TrainerSpec& trainer,
                                const SplitSpec& split, const RunMode& mode,
                                std::uint64_t master_seed, const EngineOptions& options = {});

// Record files for resumable runs.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path dir);

  std::map<std::string, AssignmentRecord> load() const;
  void save(const AssignmentRecord& record) const;
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace bucketperm
