#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "bucketperm/config.hpp"
#include "bucketperm/error.hpp"
#include "bucketperm/experiment.hpp"
#include "bucketperm/report.hpp"
#include "oracles.hpp"

using namespace bucketperm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json gaussian_config(const fs::path& out, double delta = 10.0) {
  return {{"dataset",
           {{"source", "synthetic"},
            {"generator", "gaussian_buckets"},
            {"buckets", 6},
            {"class_bucket_counts", {2, 4}},
            {"units_per_bucket", 30},
            {"dim", 4},
            {"delta", delta}}},
          {"trainer", {{"kind", "logistic_regression"}, {"epochs", 10}}},
          {"master_seed", 1},
          {"output_dir", out.string()}};
}

ErrorCode config_error(const json& doc, const fs::path& base = ".") {
  try {
    parse_config(doc, base);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a config error");
  return ErrorCode::InvalidSpec;
}

}  // namespace

TEST_CASE("config defaults fill the effective config") {
  const auto cfg = parse_config(gaussian_config("out"), ".");
  CHECK(cfg.trainer.kind == TrainerKind::logistic_regression);
  CHECK(cfg.trainer.learning_rate == 0.05);
  CHECK(cfg.split.protocol == SplitProtocol::within_bucket_stratified);
  CHECK(cfg.split.test_fraction == 0.2);
  CHECK(cfg.split.seed == 1);
  CHECK(cfg.mode.kind == ModeKind::exhaustive);
  CHECK(cfg.budget_cap == 10000);
  const auto eff = effective_config(cfg);
  CHECK(eff["dataset"]["noise"] == 1.0);
  CHECK(eff["trainer"]["hidden_dims"] == json::array({64}));
  CHECK_FALSE(eff.contains("output_dir"));
  CHECK_FALSE(eff.contains("workers"));
  // The effective config parses to itself.
  CHECK(effective_config(parse_config(eff, ".")) == eff);
}

TEST_CASE("config errors") {
  auto doc = gaussian_config("out");
  doc["trainer"]["epoch"] = 3;
  CHECK(config_error(doc) == ErrorCode::ConfigError);

  doc = gaussian_config("out");
  doc["mode"] = {{"kind", "bootstrap"}};
  CHECK(config_error(doc) == ErrorCode::ConfigError);

  doc = gaussian_config("out");
  doc["split"] = {{"test_fraction", 1.5}};
  CHECK(config_error(doc) == ErrorCode::ConfigError);

  doc = gaussian_config("out");
  doc["master_seed"] = -4;
  CHECK(config_error(doc) == ErrorCode::ConfigError);

  doc = gaussian_config("out");
  doc["trainer"]["epochs"] = 0;
  CHECK(config_error(doc) == ErrorCode::ConfigError);

  const json missing{{"dataset", {{"source", "csv"}, {"path", "no/such/file.csv"}}}};
  try {
    parse_config(missing, "/tmp");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(std::string(e.what()).find("/tmp/no/such/file.csv") != std::string::npos);
  }
  CHECK(config_error({{"dataset", {{"source", "parquet"}}}}) == ErrorCode::ConfigError);
}

TEST_CASE("validation overview of a (5,5) design") {
  json doc{{"dataset",
            {{"source", "synthetic"}, {"generator", "gaussian_buckets"}, {"buckets", 10}, {"units_per_bucket", 5}}}};
  const auto o = overview(build_dataset(parse_config(doc, ".")));
  CHECK(o.validation.ok());
  CHECK(o.m_total == 252);
  CHECK(o.p_min == doctest::Approx(0.0040).epsilon(0.01));
  const auto text = overview_text(o);
  CHECK(text.find("M=252") != std::string::npos);
  CHECK(overview_json(o)["class_bucket_counts"] == json::array({5, 5}));
}

TEST_CASE("a single-class dataset is rejected") {
  oracle::TempDir dir("exp");
  std::ofstream(dir.path / "one.csv") << "unit_id,bucket_id,label,x\nu0,a,1,0\nu1,b,1,1\n";
  const json doc{{"dataset", {{"source", "csv"}, {"path", "one.csv"}}}};
  const auto cfg = parse_config(doc, dir.path);
  try {
    build_dataset(cfg);
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }
}

TEST_CASE("run writes deterministic reports and reaches p_min on separable data") {
  oracle::TempDir dir("exp");
  auto cfg = parse_config(gaussian_config(dir.path / "a"), ".");
  const auto r = run_experiment(cfg);
  CHECK(r.t_obs == 1.0);
  CHECK(r.p.value == r.p.p_min);
  for (const char* f : {"report.json", "null_histogram.csv", "convergence.csv", "timing.json", "config.json"}) {
    CHECK(fs::exists(dir.path / "a" / f));
  }
  const auto first = slurp(dir.path / "a" / "report.json");
  cfg.workers = 3;
  run_experiment(cfg);
  CHECK(slurp(dir.path / "a" / "report.json") == first);

  // The embedded effective config reproduces the report on its own.
  const auto report = json::parse(first);
  auto again = parse_config(report["config"], ".");
  again.output_dir = dir.path / "b";
  run_experiment(again);
  CHECK(slurp(dir.path / "b" / "report.json") == first);

  CHECK(report["schema_version"] == 1);
  CHECK(report["p_value"]["num"] == 1);
  CHECK(report["p_value"]["den"] == 15);
  CHECK(report["p_min"]["den"] == 15);
}

TEST_CASE("an interrupted run resumes to the uninterrupted report") {
  oracle::TempDir dir("exp");
  auto doc = gaussian_config(dir.path / "full", 2.0);
  doc["mode"] = {{"kind", "monte_carlo"}, {"samples", 12}};
  doc["trainer"] = {{"kind", "mlp"}, {"hidden_dims", {8}}};
  const auto cfg = parse_config(doc, ".");
  run_experiment(cfg);

  auto cut = cfg;
  cut.output_dir = dir.path / "cut";
  RunControl stop;
  stop.max_new_evaluations = 5;
  const auto partial = run_experiment(cut, stop);
  CHECK_FALSE(partial.complete);
  CHECK_FALSE(fs::exists(cut.output_dir / "report.json"));
  std::ostringstream log;
  RunControl c;
  c.log = &log;
  const auto resumed = resume_experiment(cut.output_dir, c, 2);
  CHECK(resumed.complete);
  // Only the seven missing assignments were trained.
  const std::string lines = log.str();
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 7);
  CHECK(slurp(cut.output_dir / "report.json") == slurp(dir.path / "full" / "report.json"));
}

TEST_CASE("sweeps") {
  oracle::TempDir dir("exp");
  const auto cfg = parse_config(gaussian_config(dir.path / "s"), ".");
  const auto rows =
      run_sweep(cfg, "trainer.kind", {"nearest_centroid", "logistic_regression", "mlp"}, {});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.report.p.m_total == 15);
    CHECK(r.report.p.p_min == rows[0].report.p.p_min);
  }
  const auto csv = slurp(dir.path / "s" / "sweep_trainer_kind.csv");
  CHECK(csv.rfind("value,T_obs,p,p_min,evaluated,wall_time", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir.path / "s" / "trainer.kind=mlp" / "report.json"));

  const auto seeded = run_sweep(cfg, "delta", {"0", "10"}, {1, 2});
  CHECK(seeded.size() == 4);
  CHECK(seeded[3].master_seed == 2);
  CHECK(seeded[3].value == "10");

  CHECK_THROWS_AS(run_sweep(cfg, "delta", {}, {}), Error);
  CHECK_THROWS_AS(run_sweep(cfg, "theta", {"10"}, {}), Error);
  CHECK_THROWS_AS(run_sweep(cfg, "delta", {"ten"}, {}), Error);
  CHECK_THROWS_AS(run_sweep(cfg, "epochs", {"3"}, {}), Error);
}

TEST_CASE("cue sweeps edit the dataset section") {
  json doc{{"dataset",
            {{"source", "synthetic"},
             {"generator", "glyphs"},
             {"units_per_class", 2},
             {"cue", {{"kind", "color"}, {"mu_r", 0.5}}}}}};
  for (int d = 0; d < 10; ++d) doc["class_grouping"][std::to_string(d)] = d < 5 ? 1 : 2;
  const auto cfg = parse_config(doc, ".");
  const auto swept = with_parameter(cfg, "mu_R", "0.85");
  CHECK(swept.dataset["cue"]["mu_r"] == 0.85);
  const auto ds = build_dataset(swept);
  CHECK(ds.num_features() == 3 * 784);
  CHECK(ds.class_bucket_counts() == std::vector<int>{5, 5});
}

TEST_CASE("embedding section runs through cached_run") {
  oracle::TempDir dir("exp");
  auto doc = gaussian_config(dir.path / "e");
  doc["dataset"]["dim"] = 20;
  doc["embedding"] = {{"dim", 3}, {"fit_on", "train"}};
  const auto r = run_experiment(parse_config(doc, "."));
  CHECK(r.p.value == r.p.p_min);
  CHECK(r.embed_seconds > 0.0);
  const auto timing = json::parse(slurp(dir.path / "e" / "timing.json"));
  CHECK(timing.contains("embed_seconds"));
}
