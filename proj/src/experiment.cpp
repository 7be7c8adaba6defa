#include "bucketperm/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bucketperm/error.hpp"
#include "bucketperm/report.hpp"

namespace bucketperm {
namespace {

namespace fs = std::filesystem;

EngineOptions engine_options(const ExperimentConfig& config, const RunControl& control,
                             const fs::path& record_dir) {
  EngineOptions o;
  o.workers = resolved_workers(config);
  o.budget_cap = config.budget_cap;
  o.record_dir = record_dir;
  o.max_new_evaluations = control.max_new_evaluations;
  if (control.log) {
    std::ostream* log = control.log;
    o.on_complete = [log](std::size_t done, std::size_t total, const AssignmentRecord& r) {
      *log << "[" << done << "/" << total << "] " << r.key << " " << r.statistic << "\n";
      log->flush();
    };
  }
  return o;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

DatasetOverview overview(const BucketedDataset& ds) {
  DatasetOverview o;
  o.validation = validate(ds);
  o.buckets = ds.num_buckets();
  if (!o.validation.ok()) return o;
  o.classes = ds.num_classes();
  o.class_bucket_counts = ds.class_bucket_counts();
  o.m_total = count_unique_assignments(o.class_bucket_counts);
  o.p_min = 1.0 / to_double(o.m_total);
  return o;
}

nlohmann::json overview_json(const DatasetOverview& o) {
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& issue : o.validation.issues) issues.push_back(issue.describe());
  nlohmann::json j{{"valid", o.validation.ok()}, {"B", o.buckets}, {"issues", issues}};
  if (o.validation.ok()) {
    j["K"] = o.classes;
    j["class_bucket_counts"] = o.class_bucket_counts;
    j["M_total"] = big_to_json(o.m_total);
    j["p_min"] = o.p_min;
  }
  return j;
}

std::string overview_text(const DatasetOverview& o) {
  std::ostringstream s;
  s << "B=" << o.buckets << "\n";
  if (!o.validation.ok()) {
    for (const auto& issue : o.validation.issues) s << "issue: " << issue.describe() << "\n";
    return s.str();
  }
  s << "K=" << o.classes << "\n";
  s << "class_bucket_counts=";
  for (std::size_t k = 0; k < o.class_bucket_counts.size(); ++k) {
    s << (k ? "," : "") << o.class_bucket_counts[k];
  }
  s << "\nM=" << o.m_total << "\n";
  s << "p_min=" << format_double(o.p_min) << "\n";
  return s.str();
}

Embedding embedding_for(const ExperimentConfig& config, const BucketedDataset& ds) {
  const EmbeddingSpec& spec = config.embedding.value();
  if (!spec.path.empty()) return load_embedding(spec.path);
  if (spec.fit_on_train_only) {
    const Split split = make_split(ds, config.split);
    return fit_embedding(ds.features, spec.dim, spec.seed, split.train);
  }
  return fit_embedding(ds.features, spec.dim, spec.seed);
}

TestReport execute(const ExperimentConfig& config, const BucketedDataset& ds,
                   const EngineOptions& options) {
  if (config.embedding) {
    const Embedding e = embedding_for(config, ds);
    return cached_run(ds, e, config.trainer, config.split, config.mode, config.master_seed, options);
  }
  return run_permutation_test(ds, config.trainer, config.split, config.mode, config.master_seed, options);
}

TestReport run_experiment(const ExperimentConfig& config, const RunControl& control) {
  const fs::path dir = config.output_dir;
  const fs::path records = dir / "records";
  fs::create_directories(dir);
  if (!control.resume) fs::remove_all(records);
  fs::create_directories(records);
  write_text(dir / "config.json", full_config(config).dump(2) + "\n");

  const BucketedDataset ds = build_dataset(config);
  const TestReport report = execute(config, ds, engine_options(config, control, records));
  if (report.complete) {
    write_report_files(report, effective_config(config), dir);
  } else if (control.log) {
    *control.log << "stopped after " << report.evaluated << " assignments; continue with resume "
                 << dir.string() << "\n";
  }
  return report;
}

TestReport resume_experiment(const fs::path& output_dir, const RunControl& control,
                             std::optional<std::size_t> workers) {
  ExperimentConfig config = load_config(output_dir / "config.json");
  config.output_dir = output_dir;
  if (workers) config.workers = *workers;
  RunControl c = control;
  c.resume = true;
  return run_experiment(config, c);
}

ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& name,
                                const std::string& value) {
  ExperimentConfig out = config;
  if (name == "trainer.kind" || name == "trainer") {
    try {
      out.trainer.kind = trainer_kind_from_string(value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("sweep value: ") + e.what());
    }
    return out;
  }
  double number = 0.0;
  try {
    std::size_t used = 0;
    number = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "sweep value '" + value + "' is not a number");
  }
  auto& d = out.dataset;
  const auto cue_kind = d.contains("cue") ? d["cue"]["kind"].get<std::string>() : std::string();
  if (name == "theta") {
    if (cue_kind != "rotation") throw Error(ErrorCode::ConfigError, "theta needs a rotation cue");
    d["cue"]["theta"] = number;
  } else if (name == "mu_R" || name == "mu_r") {
    if (cue_kind != "color") throw Error(ErrorCode::ConfigError, "mu_R needs a color cue");
    d["cue"]["mu_r"] = number;
  } else if (name == "delta") {
    if (d.value("generator", "") != "gaussian_buckets") {
      throw Error(ErrorCode::ConfigError, "delta needs the gaussian_buckets generator");
    }
    d["delta"] = number;
  } else {
    throw Error(ErrorCode::ConfigError,
                "cannot sweep '" + name + "'; choose theta, mu_R, delta or trainer.kind");
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& name,
                                const std::vector<std::string>& values,
                                const std::vector<std::uint64_t>& seeds, const RunControl& control) {
  if (values.empty()) throw Error(ErrorCode::ConfigError, "sweep needs at least one value");
  // Validate every value before running anything.
  for (const auto& v : values) with_parameter(config, name, v);

  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector{config.master_seed} : seeds;
  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    for (std::uint64_t seed : seed_list) {
      ExperimentConfig c = with_parameter(config, name, v);
      c.set_master_seed(seed);
      c.output_dir = config.output_dir / (name + "=" + v);
      if (!seeds.empty()) c.output_dir /= "seed=" + std::to_string(seed);
      const auto t0 = std::chrono::steady_clock::now();
      SweepRow row{v, seed, run_experiment(c, control), 0.0};
      row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back(std::move(row));
    }
  }
  fs::create_directories(config.output_dir);
  std::string safe = name;
  for (char& ch : safe) {
    if (ch == '.') ch = '_';
  }
  write_text(config.output_dir / ("sweep_" + safe + ".csv"), sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream s;
  s << "value,T_obs,p,p_min,evaluated,wall_time,master_seed\n";
  for (const auto& r : rows) {
    s << r.value << "," << format_double(r.report.t_obs) << "," << format_double(r.report.p.value) << ","
      << format_double(r.report.p.p_min) << "," << r.report.evaluated << ","
      << format_double(r.wall_seconds) << "," << r.master_seed << "\n";
  }
  return s.str();
}

}  // namespace bucketperm
