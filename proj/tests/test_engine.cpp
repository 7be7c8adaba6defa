#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <set>

#include "bucketperm/engine.hpp"
#include "bucketperm/error.hpp"
#include "bucketperm/report.hpp"
#include "bucketperm/rng.hpp"
#include "bucketperm/synthetic.hpp"
#include "oracles.hpp"

using namespace bucketperm;

namespace {

// A statistic that depends only on (assignment, seed), like a real trainer.
double fake_statistic(const LabelAssignment& a, std::uint64_t seed) {
  Rng rng(seed ^ fnv1a64(a.canonical_key()));
  return static_cast<double>(rng.below(21)) / 20.0;
}

// Six buckets of 30 units; feature 0 equals the bucket label, the rest is noise.
BucketedDataset label_feature_dataset(std::vector<int> labels) {
  BucketedDataset ds;
  const std::size_t per = 30;
  ds.features = Matrix(labels.size() * per, 3);
  Rng rng(1);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    ds.bucket_ids.push_back("b" + std::to_string(b));
    for (std::size_t u = 0; u < per; ++u) {
      const std::size_t i = b * per + u;
      ds.features(i, 0) = labels[b];
      ds.features(i, 1) = rng.normal();
      ds.features(i, 2) = rng.normal();
      ds.unit_ids.push_back("u" + std::to_string(i));
      ds.bucket_of.push_back(b);
    }
  }
  ds.bucket_labels = std::move(labels);
  return ds;
}

TrainerSpec logistic() {
  TrainerSpec t;
  t.kind = TrainerKind::logistic_regression;
  t.epochs = 20;
  t.learning_rate = 0.1;
  return t;
}

}  // namespace

TEST_CASE("assignment seeds depend only on master seed and key") {
  CHECK(assignment_seed(1, "1.2.1") == assignment_seed(1, "1.2.1"));
  CHECK(assignment_seed(1, "1.2.1") != assignment_seed(2, "1.2.1"));
  CHECK(assignment_seed(1, "1.2.1") != assignment_seed(1, "1.1.2"));
}

TEST_CASE("select_assignments orders and caps") {
  const LabelAssignment observed{{2, 1, 2, 1}};
  const auto ex = select_assignments(observed, RunMode::exhaustive(), 100);
  CHECK(ex.size() == 6);
  CHECK(std::is_sorted(ex.begin(), ex.end()));
  const auto mc = select_assignments(observed, RunMode::monte_carlo(4, 9), 100);
  CHECK(mc.size() == 4);
  CHECK(mc[0] == observed);
  CHECK_THROWS_AS(select_assignments(LabelAssignment{{1, 1, 1, 1, 1, 2, 2, 2, 2, 2}},
                                     RunMode::exhaustive(), 251),
                  Error);
  try {
    select_assignments(LabelAssignment{{1, 1, 1, 1, 1, 2, 2, 2, 2, 2}}, RunMode::exhaustive(), 251);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetExceeded);
  }
}

TEST_CASE("exhaustive run over a synthetic evaluator matches the definition") {
  const LabelAssignment observed{{1, 2, 1, 2, 1, 2, 2}};
  const auto r = run_assignments(observed, fake_statistic, RunMode::exhaustive(), 5);
  CHECK(r.complete);
  CHECK(r.evaluated == 35);
  CHECK(r.p.m_total == 35);
  std::vector<double> stats;
  std::set<std::string> keys;
  for (const auto& rec : r.records) {
    stats.push_back(rec.statistic);
    keys.insert(rec.key);
    CHECK(rec.seed == assignment_seed(5, rec.key));
  }
  CHECK(keys.size() == 35);
  CHECK(r.t_obs == fake_statistic(observed, assignment_seed(5, observed.canonical_key())));
  CHECK(r.p.value == oracle::direct_p(r.t_obs, stats));
  CHECK(r.convergence.back().p == r.p.value);
  CHECK(r.convergence.size() == 35);
}

TEST_CASE("worker count does not change the report") {
  const LabelAssignment observed{{1, 1, 1, 1, 2, 2, 2, 2}};
  const auto mode = RunMode::monte_carlo(40, 3);
  EngineOptions one;
  EngineOptions four;
  four.workers = 4;
  const auto a = run_assignments(observed, fake_statistic, mode, 8, one);
  const auto b = run_assignments(observed, fake_statistic, mode, 8, four);
  CHECK(report_to_json(a, {}).dump() == report_to_json(b, {}).dump());

  const auto ds = label_feature_dataset({1, 2, 1, 2, 2, 1});
  TrainerSpec mlp;
  mlp.hidden_dims = {8};
  const auto x = run_permutation_test(ds, mlp, {}, RunMode::exhaustive(), 4, one);
  const auto y = run_permutation_test(ds, mlp, {}, RunMode::exhaustive(), 4, four);
  CHECK(report_to_json(x, {}).dump() == report_to_json(y, {}).dump());
}

TEST_CASE("evaluator failure aborts the test and names the assignment") {
  const LabelAssignment observed{{1, 1, 2, 2}};
  auto failing = [](const LabelAssignment& a, std::uint64_t) -> double {
    if (a.canonical_key() == "1.2.2.1") throw Error(ErrorCode::DivergedLoss, "loss is nan");
    return 0.5;
  };
  try {
    run_assignments(observed, failing, RunMode::exhaustive(), 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergedLoss);
    CHECK(std::string(e.what()).find("1.2.2.1") != std::string::npos);
  }
}

TEST_CASE("interrupted runs resume to the same report") {
  oracle::TempDir dir("resume");
  const LabelAssignment observed{{1, 2, 1, 2, 1, 2}};
  std::atomic<int> calls{0};
  auto counted = [&](const LabelAssignment& a, std::uint64_t seed) {
    ++calls;
    return fake_statistic(a, seed);
  };
  const auto reference = run_assignments(observed, fake_statistic, RunMode::exhaustive(), 2);

  EngineOptions partial;
  partial.record_dir = dir.path;
  partial.max_new_evaluations = 7;
  const auto first = run_assignments(observed, counted, RunMode::exhaustive(), 2, partial);
  CHECK_FALSE(first.complete);
  CHECK(first.evaluated == 7);
  CHECK(calls == 7);

  EngineOptions rest;
  rest.record_dir = dir.path;
  rest.workers = 3;
  const auto second = run_assignments(observed, counted, RunMode::exhaustive(), 2, rest);
  CHECK(second.complete);
  CHECK(calls == 20);
  CHECK(report_to_json(second, {}).dump() == report_to_json(reference, {}).dump());

  // A different master seed invalidates every record.
  calls = 0;
  run_assignments(observed, counted, RunMode::exhaustive(), 3, rest);
  CHECK(calls == 20);
}

TEST_CASE("record store survives torn files and hashes long keys") {
  oracle::TempDir dir("store");
  RecordStore store(dir.path);
  store.save({"1.2", 0.75, 9, 0.1});
  std::ofstream(dir.path / "2.1.json") << "{\"key\": \"2.1\", \"stat";
  const auto loaded = store.load();
  CHECK(loaded.size() == 1);
  CHECK(loaded.at("1.2").statistic == 0.75);
  std::string long_key;
  for (int i = 0; i < 120; ++i) long_key += i ? ".1" : "1";
  CHECK(store.path_for(long_key).filename().string().front() == 'h');
  store.save({long_key, 0.5, 1, 0.0});
  CHECK(store.load().at(long_key).statistic == 0.5);
}

TEST_CASE("zero-information features never look significant") {
  BucketedDataset ds = label_feature_dataset({1, 1, 1, 2, 2, 2});
  for (double& v : ds.features.values()) v = 0.25;
  TrainerSpec mlp;
  mlp.hidden_dims = {4};
  int large = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitSpec split;
    split.seed = seed;
    const auto r = run_permutation_test(ds, mlp, split, RunMode::exhaustive(), seed);
    large += r.p.value >= 0.5 ? 1 : 0;
  }
  CHECK(large >= 95);
}

TEST_CASE("a label-copying feature: complementary assignment ties with balanced buckets") {
  // With (3,3) buckets the swapped label vector is just as learnable, so it
  // ties T_obs and the attainable p is 2/20, not 1/20.
  const auto balanced = run_permutation_test(label_feature_dataset({1, 2, 1, 2, 2, 1}), logistic(), {},
                                             RunMode::exhaustive(), 0);
  CHECK(balanced.t_obs == 1.0);
  CHECK(balanced.p.m_total == 20);
  CHECK(balanced.p.count == 2);
  CHECK(balanced.p.value == doctest::Approx(0.1));

  // With (2,4) buckets the complement is not in the universe and p reaches p_min.
  const auto unbalanced = run_permutation_test(label_feature_dataset({1, 2, 2, 1, 2, 2}), logistic(), {},
                                               RunMode::exhaustive(), 0);
  CHECK(unbalanced.t_obs == 1.0);
  CHECK(unbalanced.p.m_total == 15);
  CHECK(unbalanced.p.value == unbalanced.p.p_min);
}

TEST_CASE("progress callback sees every completion once") {
  std::vector<std::size_t> seen;
  EngineOptions o;
  o.on_complete = [&](std::size_t done, std::size_t total, const AssignmentRecord&) {
    seen.push_back(done);
    CHECK(total == 10);
  };
  run_assignments(LabelAssignment{{1, 2, 1, 2, 2}}, fake_statistic, RunMode::exhaustive(), 0, o);
  CHECK(seen.size() == 10);
  CHECK(seen.back() == 10);
}
