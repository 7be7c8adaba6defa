#include "bucketperm/engine.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bucketperm/error.hpp"
#include "bucketperm/rng.hpp"

namespace bucketperm {

std::uint64_t assignment_seed(std::uint64_t master_seed, const std::string& key) {
  return derive_seed(master_seed, "assignment/" + key);
}

std::vector<LabelAssignment> select_assignments(const LabelAssignment& observed, const RunMode& mode,
                                                std::uint64_t budget_cap) {
  int k = 0;
  for (int label : observed.labels) k = std::max(k, label);
  const BigCount total = count_unique_assignments(observed.class_counts(k));
  if (mode.kind == ModeKind::monte_carlo) return sample_assignments(observed, mode.samples, mode.seed);
  if (total > BigCount(budget_cap)) {
    throw Error(ErrorCode::BudgetExceeded, total.str() + " assignments exceed the exhaustive cap of " +
                                               std::to_string(budget_cap) + "; use monte_carlo mode");
  }
  return enumerate_assignments(observed);
}

// ---------------------------------------------------------------------------

RecordStore::RecordStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path RecordStore::path_for(const std::string& key) const {
  if (key.size() <= 180) return dir_ / (key + ".json");
  std::ostringstream name;
  name << "h" << std::hex << fnv1a64(key) << ".json";
  return dir_ / name.str();
}

std::map<std::string, AssignmentRecord> RecordStore::load() const {
  std::map<std::string, AssignmentRecord> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    nlohmann::json j;
    try {
      in >> j;
      AssignmentRecord r{j.at("key").get<std::string>(), j.at("statistic").get<double>(),
                         j.at("seed").get<std::uint64_t>(), j.value("seconds", 0.0)};
      out[r.key] = r;
    } catch (const nlohmann::json::exception&) {
      // A partially written record from an interrupted run; it is recomputed.
    }
  }
  return out;
}

void RecordStore::save(const AssignmentRecord& r) const {
  const auto target = path_for(r.key);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    nlohmann::json j{{"schema_version", 1},
                     {"key", r.key},
                     {"statistic", r.statistic},
                     {"seed", r.seed},
                     {"seconds", r.seconds}};
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------

TestReport run_assignments(const LabelAssignment& observed, const AssignmentEvaluator& evaluate,
                           const RunMode& mode, std::uint64_t master_seed,
                           const EngineOptions& options) {
  int k = 0;
  for (int label : observed.labels) k = std::max(k, label);
  const auto counts = observed.class_counts(k);
  const BigCount m_total = count_unique_assignments(counts);
  const auto assignments = select_assignments(observed, mode, options.budget_cap);
  const std::size_t n = assignments.size();

  std::vector<AssignmentRecord> records(n);
  std::vector<char> done(n, 0);
  std::vector<std::size_t> pending;
  std::optional<RecordStore> store;
  std::map<std::string, AssignmentRecord> cached;
  if (options.record_dir) {
    store.emplace(*options.record_dir);
    cached = store->load();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string key = assignments[i].canonical_key();
    const std::uint64_t seed = assignment_seed(master_seed, key);
    auto it = cached.find(key);
    if (it != cached.end() && it->second.seed == seed) {
      records[i] = it->second;
      done[i] = 1;
    } else {
      records[i] = {key, 0.0, seed, 0.0};
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::size_t completed = n - pending.size();
  std::vector<std::pair<std::size_t, std::string>> failures;
  std::vector<ErrorCode> failure_codes;
  const std::size_t budget = options.max_new_evaluations.value_or(pending.size());
  const auto started = std::chrono::steady_clock::now();

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t slot = cursor.fetch_add(1);
      if (slot >= pending.size() || slot >= budget) return;
      const std::size_t i = pending[slot];
      auto& rec = records[i];
      try {
        const auto t0 = std::chrono::steady_clock::now();
        rec.statistic = evaluate(assignments[i], rec.seed);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (store) store->save(rec);
        std::lock_guard lock(mu);
        done[i] = 1;
        ++completed;
        if (options.on_complete) options.on_complete(completed, n, rec);
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        failures.emplace_back(i, e.what());
        failure_codes.push_back(e.code());
        abort = true;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failures.emplace_back(i, e.what());
        failure_codes.push_back(ErrorCode::TrainerFailed);
        abort = true;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, pending.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (!failures.empty()) {
    std::size_t first = 0;
    for (std::size_t f = 1; f < failures.size(); ++f) {
      if (failures[f].first < failures[first].first) first = f;
    }
    throw Error(failure_codes[first], "assignment " + records[failures[first].first].key + ": " +
                                          failures[first].second);
  }

  TestReport report;
  report.mode = mode;
  report.observed_key = observed.canonical_key();
  report.class_counts = counts;
  report.permutation_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.evaluated = completed;
  report.p.m_total = m_total;
  report.p.p_min = 1.0 / to_double(m_total);
  if (completed < n) {
    report.complete = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) report.records.push_back(records[i]);
    }
    return report;
  }

  report.records = records;
  NullDistribution null;
  null.mode = mode;
  null.m_total = m_total;
  null.contains_observed = false;
  std::vector<double> ordered;
  for (const auto& r : records) {
    null.entries.push_back({r.key, r.statistic});
    ordered.push_back(r.statistic);
    if (r.key == report.observed_key) {
      report.t_obs = r.statistic;
      null.contains_observed = true;
    }
  }
  report.p = fisher_p_value(report.t_obs, null);
  report.convergence = convergence_trace(ordered, report.t_obs);
  return report;
}

TestReport run_permutation_test(const BucketedDataset& dataset, const TrainerSpec& trainer,
                                const SplitSpec& split_spec, const RunMode& mode,
                                std::uint64_t master_seed, const EngineOptions& options) {
  require_valid(dataset);
  trainer.validate();
  const Split split = make_split(dataset, split_spec);
  const PreparedSplit prepared = PreparedSplit::build(dataset, dataset.features, split);
  auto evaluate = [&](const LabelAssignment& a, std::uint64_t seed) {
    return run_prepared(prepared, a, trainer, seed);
  };
  return run_assignments(LabelAssignment{dataset.bucket_labels}, evaluate, mode, master_seed, options);
}

}  // namespace bucketperm
