// bucketperm: bucket-level label-permutation tests from the command line.
//
// Exit codes: 0 success, 1 configuration or data error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bucketperm/assignment.hpp"
#include "bucketperm/config.hpp"
#include "bucketperm/embedding.hpp"
#include "bucketperm/error.hpp"
#include "bucketperm/experiment.hpp"
#include "bucketperm/kernels.hpp"
#include "bucketperm/report.hpp"
#include "bucketperm/stats.hpp"

namespace fs = std::filesystem;
using namespace bucketperm;

namespace {

constexpr int kConfigFailure = 1;
constexpr int kRuntimeFailure = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::DivergedLoss:
    case ErrorCode::TrainerFailed:
    case ErrorCode::IoError:
      return kRuntimeFailure;
    default:
      return kConfigFailure;
  }
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::size_t parse_workers(const std::string& text) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(text, &used);
    if (used == text.size() && n >= 0) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, "worker count must be a non-negative integer, got '" + text + "'");
}

// Flags win over the environment, which wins over the config file.
struct Overrides {
  std::string output_dir;
  std::string workers;
  std::optional<std::uint64_t> seed;

  void apply(ExperimentConfig& c) const {
    if (!output_dir.empty()) {
      c.output_dir = output_dir;
    } else if (auto e = env("BUCKETPERM_OUTPUT_DIR")) {
      c.output_dir = *e;
    }
    if (!workers.empty()) {
      c.workers = parse_workers(workers);
    } else if (auto e = env("BUCKETPERM_WORKERS")) {
      c.workers = parse_workers(*e);
    }
    if (seed) c.set_master_seed(*seed);
    c.output_dir = fs::absolute(c.output_dir).lexically_normal();
  }

  std::optional<std::size_t> worker_override() const {
    if (!workers.empty()) return parse_workers(workers);
    if (auto e = env("BUCKETPERM_WORKERS")) return parse_workers(*e);
    return std::nullopt;
  }
};

void add_overrides(CLI::App* cmd, Overrides& o, bool with_seed) {
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory (env BUCKETPERM_OUTPUT_DIR)");
  cmd->add_option("-j,--workers", o.workers, "Worker threads, 0 = all cores (env BUCKETPERM_WORKERS)");
  if (with_seed) cmd->add_option("--seed", o.seed, "Master seed");
}

void print_report_summary(const TestReport& r, const fs::path& dir) {
  std::cout << "T_obs=" << r.t_obs << "\n"
            << "p=" << r.p.count << "/" << r.p.total << "=" << r.p.value << "\n"
            << "p_min=" << r.p.p_min << " (M=" << r.p.m_total << ")\n"
            << "evaluated=" << r.evaluated << "\n"
            << "output=" << dir.string() << "\n";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bucket-level label-permutation tests"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--simd", isa, "Kernel set: scalar, avx2, neon (env BUCKETPERM_SIMD)");

  std::string config_path;
  bool as_json = false;
  bool quiet = false;

  auto* validate_cmd = app.add_subcommand("validate", "Check a config and its dataset");
  validate_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
  validate_cmd->add_flag("--json", as_json, "Machine-readable output");

  std::vector<int> counts;
  auto* count_cmd = app.add_subcommand("count", "Number of unique label assignments");
  count_cmd->add_option("counts", counts, "Buckets per class, e.g. 5 5");
  count_cmd->add_option("--config", config_path, "Take the counts from a config's dataset");
  count_cmd->add_flag("--json", as_json, "Machine-readable output");

  Overrides run_ov;
  std::optional<std::size_t> max_evals;
  auto* run_cmd = app.add_subcommand("run", "Run a permutation test");
  run_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
  add_overrides(run_cmd, run_ov, true);
  run_cmd->add_option("--max-evaluations", max_evals, "Stop after this many new evaluations");
  run_cmd->add_flag("-q,--quiet", quiet, "No per-assignment log");

  Overrides sweep_ov;
  std::string param, values_text, seeds_text;
  auto* sweep_cmd = app.add_subcommand("sweep", "One test per parameter value");
  sweep_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("--param", param, "theta, mu_R, delta or trainer.kind")->required();
  sweep_cmd->add_option("--values", values_text, "Comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "Comma-separated master seeds");
  add_overrides(sweep_cmd, sweep_ov, false);
  sweep_cmd->add_flag("-q,--quiet", quiet, "No per-assignment log");

  std::optional<std::size_t> embed_dim;
  std::string embed_out, inspect_path;
  auto* embed_cmd = app.add_subcommand("fit-embed", "Fit or inspect a label-free embedding");
  embed_cmd->add_option("config", config_path, "Experiment config (JSON)");
  embed_cmd->add_option("--dim", embed_dim, "Embedding dimension (default: config or 16)");
  embed_cmd->add_option("--out", embed_out, "Output file (default: <output_dir>/embedding.bin)");
  embed_cmd->add_option("--inspect", inspect_path, "Print the header of an embedding file");
  Overrides embed_ov;
  embed_cmd->add_option("-o,--output-dir", embed_ov.output_dir, "Output directory");

  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-gen", "Export a config's dataset as CSV");
  synth_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Directory (default: <output_dir>/dataset)");
  Overrides synth_ov;
  synth_cmd->add_option("-o,--output-dir", synth_ov.output_dir, "Output directory");

  std::string resume_dir;
  Overrides resume_ov;
  auto* resume_cmd = app.add_subcommand("resume", "Continue an interrupted run");
  resume_cmd->add_option("output_dir", resume_dir, "Directory of the interrupted run")->required();
  resume_cmd->add_option("-j,--workers", resume_ov.workers, "Worker threads");
  resume_cmd->add_flag("-q,--quiet", quiet, "No per-assignment log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigFailure;
  }

  try {
    if (!isa.empty()) kernels::set_active(kernels::isa_from_string(isa));
    RunControl control;
    if (!quiet) control.log = &std::cerr;

    if (*validate_cmd) {
      const ExperimentConfig config = load_config(config_path);
      const DatasetOverview o = overview(build_dataset(config));
      if (as_json) {
        std::cout << overview_json(o).dump(2) << "\n";
      } else {
        std::cout << overview_text(o);
      }
      return o.validation.ok() ? 0 : kConfigFailure;
    }

    if (*count_cmd) {
      if (!config_path.empty()) {
        counts = build_dataset(load_config(config_path)).class_bucket_counts();
      }
      if (counts.empty()) throw Error(ErrorCode::ConfigError, "give class counts or --config");
      const BigCount m = count_unique_assignments(counts);
      if (as_json) {
        std::cout << nlohmann::json{{"class_bucket_counts", counts},
                                    {"M_total", big_to_json(m)},
                                    {"p_min", 1.0 / to_double(m)}}
                         .dump(2)
                  << "\n";
      } else {
        std::cout << "M=" << m << "\np_min=" << 1.0 / to_double(m) << "\n";
      }
      return 0;
    }

    if (*run_cmd) {
      ExperimentConfig config = load_config(config_path);
      run_ov.apply(config);
      control.max_new_evaluations = max_evals;
      const TestReport r = run_experiment(config, control);
      if (!r.complete) {
        std::cout << "incomplete: " << r.evaluated << " assignments recorded in " << config.output_dir.string()
                  << "\n";
        return 0;
      }
      print_report_summary(r, config.output_dir);
      return 0;
    }

    if (*sweep_cmd) {
      ExperimentConfig config = load_config(config_path);
      sweep_ov.apply(config);
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(seeds_text)) {
        try {
          seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw Error(ErrorCode::ConfigError, "seed '" + s + "' is not an integer");
        }
      }
      const auto rows = run_sweep(config, param, split_list(values_text), seeds, control);
      std::cout << sweep_csv(rows);
      return 0;
    }

    if (*embed_cmd) {
      if (!inspect_path.empty()) {
        std::cout << embedding_header(load_embedding(inspect_path)).dump(2) << "\n";
        return 0;
      }
      if (config_path.empty()) throw Error(ErrorCode::ConfigError, "fit-embed needs a config or --inspect");
      ExperimentConfig config = load_config(config_path);
      embed_ov.apply(config);
      EmbeddingSpec spec = config.embedding.value_or(EmbeddingSpec{});
      spec.path.clear();
      if (embed_dim) spec.dim = *embed_dim;
      config.embedding = spec;
      const BucketedDataset ds = build_dataset(config);
      const Embedding e = embedding_for(config, ds);
      const fs::path out = embed_out.empty() ? config.output_dir / "embedding.bin" : fs::path(embed_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_embedding(e, out);
      std::cout << embedding_header(e).dump(2) << "\n";
      if (e.rank_deficient) {
        std::cerr << "warning: RankDeficient, only " << e.dim() << " of " << e.requested_dim
                  << " components are nonzero\n";
      }
      return 0;
    }

    if (*synth_cmd) {
      ExperimentConfig config = load_config(config_path);
      synth_ov.apply(config);
      const BucketedDataset ds = build_dataset(config);
      const fs::path dir = synth_out.empty() ? config.output_dir / "dataset" : fs::path(synth_out);
      fs::create_directories(dir);
      write_csv(ds, dir / "dataset.csv");
      write_dataset_summary(ds, dir / "dataset_summary.json");
      std::cout << overview_text(overview(ds)) << "output=" << dir.string() << "\n";
      return 0;
    }

    if (*resume_cmd) {
      const fs::path dir = fs::absolute(resume_dir).lexically_normal();
      const TestReport r = resume_experiment(dir, control, resume_ov.worker_override());
      if (!r.complete) return kRuntimeFailure;
      print_report_summary(r, dir);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return 0;
}
