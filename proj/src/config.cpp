#include "bucketperm/config.hpp"

#include <fstream>
#include <set>
#include <thread>

#include "bucketperm/error.hpp"
#include "bucketperm/synthetic.hpp"

namespace bucketperm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

// Typed, strict view of one JSON object. Keys never read are reported by finish().
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(where_ + "." + key + " is required");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    raw(key);
    return convert<T>(key);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(where_ + "." + key + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(seed(key, fallback));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail("unknown key " + where_ + "." + key);
    }
  }

  const std::string& where() const { return where_; }

 private:
  template <class T>
  T convert(const std::string& key) {
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(where_ + "." + key + " must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(where_ + "." + key + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(where_ + "." + key + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(where_ + "." + key + " has the wrong type");
    }
  }

  json j_;
  std::string where_;
  std::set<std::string> used_;
};

std::string existing_file(const fs::path& base_dir, const std::string& p, const std::string& what) {
  if (p.empty()) fail(what + " path is empty");
  const fs::path full = fs::absolute(base_dir / p).lexically_normal();
  if (!fs::is_regular_file(full)) fail("file not found: " + full.string() + " (" + what + ")");
  return full.string();
}

json parse_cue(const json& j) {
  Section s(j, "dataset.cue");
  const auto kind = s.required<std::string>("kind");
  json out{{"kind", kind}};
  if (kind == "color") {
    out["mu_r"] = s.get("mu_r", 0.5);
    out["sigma_r"] = s.get("sigma_r", 0.03);
    out["mu_f"] = s.get("mu_f", 0.5);
    out["sigma_f"] = s.get("sigma_f", 0.03);
    out["seed"] = s.seed("seed", 0);
    out["treated_class"] = s.get("treated_class", 1);
  } else if (kind == "rotation") {
    out["theta"] = s.get("theta", 0.0);
    out["sigma"] = s.get("sigma", 2.0);
    const auto clip = s.get("clip", std::vector<double>{-90.0, 90.0});
    if (clip.size() != 2 || !(clip[0] < clip[1])) fail("dataset.cue.clip must be [lo, hi] with lo < hi");
    out["clip"] = clip;
    out["seed"] = s.seed("seed", 0);
    const auto trunc = s.get<std::string>("truncation", "rejection");
    if (trunc != "rejection" && trunc != "clamp") fail("dataset.cue.truncation must be rejection or clamp");
    out["truncation"] = trunc;
    out["treated_class"] = s.get("treated_class", 1);
  } else {
    fail("dataset.cue.kind must be color or rotation, got " + kind);
  }
  s.finish();
  return out;
}

json parse_dataset(const json& j, const fs::path& base_dir) {
  Section s(j, "dataset");
  const auto source = s.required<std::string>("source");
  json out{{"source", source}};
  if (source == "csv") {
    out["path"] = existing_file(base_dir, s.required<std::string>("path"), "dataset.path");
    out["feature_columns"] = s.get("feature_columns", std::vector<std::string>{});
    out["unit_id_column"] = s.get<std::string>("unit_id_column", "unit_id");
    out["bucket_id_column"] = s.get<std::string>("bucket_id_column", "bucket_id");
    out["label_column"] = s.get<std::string>("label_column", "label");
    const auto table = s.get<std::string>("bucket_label_table", "");
    out["bucket_label_table"] =
        table.empty() ? std::string() : existing_file(base_dir, table, "dataset.bucket_label_table");
    const auto delim = s.get<std::string>("delimiter", ",");
    if (delim.size() != 1) fail("dataset.delimiter must be a single character");
    out["delimiter"] = delim;
  } else if (source == "idx") {
    out["images"] = existing_file(base_dir, s.required<std::string>("images"), "dataset.images");
    out["labels"] = existing_file(base_dir, s.required<std::string>("labels"), "dataset.labels");
  } else if (source == "synthetic") {
    const auto gen = s.required<std::string>("generator");
    out["generator"] = gen;
    if (gen == "gaussian_buckets") {
      out["buckets"] = s.count("buckets", 6);
      out["units_per_bucket"] = s.count("units_per_bucket", 50);
      out["dim"] = s.count("dim", 8);
      out["class_bucket_counts"] = s.get("class_bucket_counts", std::vector<std::size_t>{});
      out["delta"] = s.get("delta", 0.0);
      out["bucket_nuisance"] = s.get("bucket_nuisance", 0.0);
      out["noise"] = s.get("noise", 1.0);
      out["seed"] = s.seed("seed", 0);
    } else if (gen == "glyphs") {
      out["units_per_class"] = s.count("units_per_class", 50);
      out["size"] = s.count("size", 28);
      out["classes"] = s.count("classes", 10);
      out["seed"] = s.seed("seed", 0);
      out["rotation_jitter"] = s.get("rotation_jitter", 12.0);
      out["shift_jitter"] = s.get("shift_jitter", 2.0);
      out["noise"] = s.get("noise", 0.05);
    } else {
      fail("dataset.generator must be gaussian_buckets or glyphs, got " + gen);
    }
  } else {
    fail("dataset.source must be csv, idx or synthetic, got " + source);
  }
  if (s.has("cue")) out["cue"] = parse_cue(s.raw("cue"));
  s.finish();
  return out;
}

}  // namespace

void ExperimentConfig::set_master_seed(std::uint64_t seed) {
  master_seed = seed;
  if (split_seed_from_master) split.seed = seed;
  if (mode_seed_from_master && mode.kind == ModeKind::monte_carlo) mode.seed = seed;
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  Section top(doc, "config");
  const int version = top.get("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) {
    fail("unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig cfg;
  cfg.master_seed = top.seed("master_seed", 0);
  cfg.dataset = parse_dataset(top.raw("dataset"), base_dir);

  if (top.has("class_grouping")) {
    const json& g = top.raw("class_grouping");
    if (!g.is_object()) fail("class_grouping must map bucket ids to class values");
    for (const auto& [bucket, cls] : g.items()) {
      if (!cls.is_number_integer()) fail("class_grouping." + bucket + " must be an integer");
      cfg.class_grouping[bucket] = cls.get<int>();
    }
  }

  {
    Section s(top.has("split") ? top.raw("split") : json::object(), "split");
    try {
      cfg.split.protocol = split_protocol_from_string(
          s.get<std::string>("protocol", std::string(to_string(cfg.split.protocol))));
    } catch (const Error& e) {
      fail(std::string("split.protocol: ") + e.what());
    }
    cfg.split.test_fraction = s.get("test_fraction", cfg.split.test_fraction);
    if (!(cfg.split.test_fraction > 0.0 && cfg.split.test_fraction < 1.0)) {
      fail("split.test_fraction must lie in (0, 1)");
    }
    cfg.split_seed_from_master = !s.has("seed");
    cfg.split.seed = s.seed("seed", cfg.master_seed);
    s.finish();
  }

  {
    Section s(top.has("trainer") ? top.raw("trainer") : json::object(), "trainer");
    TrainerSpec& t = cfg.trainer;
    try {
      t.kind = trainer_kind_from_string(s.get<std::string>("kind", std::string(to_string(t.kind))));
    } catch (const Error& e) {
      fail(std::string("trainer.kind: ") + e.what());
    }
    t.hidden_dims = s.get("hidden_dims", t.hidden_dims);
    t.epochs = s.get("epochs", t.epochs);
    t.learning_rate = s.get("learning_rate", t.learning_rate);
    t.batch_size = s.count("batch_size", t.batch_size);
    t.weight_decay = s.get("weight_decay", t.weight_decay);
    t.class_balanced_loss = s.get("class_balanced_loss", t.class_balanced_loss);
    t.standardize = s.get("standardize", t.standardize);
    s.finish();
    try {
      t.validate();
    } catch (const Error& e) {
      fail(std::string("trainer: ") + e.what());
    }
  }

  {
    Section s(top.has("mode") ? top.raw("mode") : json::object(), "mode");
    const auto kind = s.get<std::string>("kind", "exhaustive");
    if (kind == "exhaustive") {
      cfg.mode = RunMode::exhaustive();
      cfg.budget_cap = s.seed("budget_cap", cfg.budget_cap);
    } else if (kind == "monte_carlo") {
      const auto samples = s.seed("samples", 100);
      if (samples < 1) fail("mode.samples must be >= 1");
      cfg.mode_seed_from_master = !s.has("seed");
      cfg.mode = RunMode::monte_carlo(samples, s.seed("seed", cfg.master_seed));
    } else {
      fail("mode.kind must be exhaustive or monte_carlo, got " + kind);
    }
    s.finish();
  }

  if (top.has("embedding")) {
    Section s(top.raw("embedding"), "embedding");
    EmbeddingSpec e;
    e.dim = s.count("dim", e.dim);
    if (e.dim < 1) fail("embedding.dim must be >= 1");
    const auto fit_on = s.get<std::string>("fit_on", "all");
    if (fit_on != "all" && fit_on != "train") fail("embedding.fit_on must be all or train");
    e.fit_on_train_only = fit_on == "train";
    e.seed = s.seed("seed", 0);
    const auto p = s.get<std::string>("path", "");
    if (!p.empty()) e.path = existing_file(base_dir, p, "embedding.path");
    s.finish();
    cfg.embedding = e;
  }

  cfg.output_dir = top.get<std::string>("output_dir", cfg.output_dir.string());
  cfg.workers = top.count("workers", 0);
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(path.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

json effective_config(const ExperimentConfig& c) {
  json grouping = json::object();
  for (const auto& [bucket, cls] : c.class_grouping) grouping[bucket] = cls;
  json mode;
  if (c.mode.kind == ModeKind::exhaustive) {
    mode = {{"kind", "exhaustive"}, {"budget_cap", c.budget_cap}};
  } else {
    mode = {{"kind", "monte_carlo"}, {"samples", c.mode.samples}, {"seed", c.mode.seed}};
  }
  json out{
      {"schema_version", kConfigSchemaVersion},
      {"dataset", c.dataset},
      {"class_grouping", grouping},
      {"split",
       {{"protocol", to_string(c.split.protocol)},
        {"test_fraction", c.split.test_fraction},
        {"seed", c.split.seed}}},
      {"trainer",
       {{"kind", to_string(c.trainer.kind)},
        {"hidden_dims", c.trainer.hidden_dims},
        {"epochs", c.trainer.epochs},
        {"learning_rate", c.trainer.learning_rate},
        {"batch_size", c.trainer.batch_size},
        {"weight_decay", c.trainer.weight_decay},
        {"class_balanced_loss", c.trainer.class_balanced_loss},
        {"standardize", c.trainer.standardize}}},
      {"mode", mode},
      {"master_seed", c.master_seed},
  };
  if (c.embedding) {
    json e{{"dim", c.embedding->dim},
           {"fit_on", c.embedding->fit_on_train_only ? "train" : "all"},
           {"seed", c.embedding->seed}};
    if (!c.embedding->path.empty()) e["path"] = c.embedding->path.string();
    out["embedding"] = e;
  }
  return out;
}

json full_config(const ExperimentConfig& c) {
  json out = effective_config(c);
  out["output_dir"] = c.output_dir.string();
  out["workers"] = c.workers;
  return out;
}

std::size_t resolved_workers(const ExperimentConfig& c) {
  if (c.workers > 0) return c.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

BucketedDataset build_dataset(const ExperimentConfig& c) {
  const json& d = c.dataset;
  const auto source = d.at("source").get<std::string>();
  BucketedDataset ds;
  if (source == "csv") {
    DatasetSchema schema;
    schema.feature_columns = d.at("feature_columns").get<std::vector<std::string>>();
    schema.unit_id_column = d.at("unit_id_column").get<std::string>();
    schema.bucket_id_column = d.at("bucket_id_column").get<std::string>();
    schema.label_column = d.at("label_column").get<std::string>();
    const auto table = d.at("bucket_label_table").get<std::string>();
    if (!table.empty()) {
      schema.label_source = DatasetSchema::LabelSource::bucket_table;
      schema.bucket_label_table = table;
    }
    schema.delimiter = d.at("delimiter").get<std::string>().front();
    ds = load_csv(d.at("path").get<std::string>(), schema);
  } else if (source == "idx") {
    ds = load_idx_images(d.at("images").get<std::string>(), d.at("labels").get<std::string>());
  } else if (d.at("generator") == "gaussian_buckets") {
    GaussianBucketConfig g;
    g.buckets = d.at("buckets").get<std::size_t>();
    g.units_per_bucket = d.at("units_per_bucket").get<std::size_t>();
    g.dim = d.at("dim").get<std::size_t>();
    g.class_bucket_counts = d.at("class_bucket_counts").get<std::vector<std::size_t>>();
    g.signal = d.at("delta").get<double>();
    g.bucket_nuisance = d.at("bucket_nuisance").get<double>();
    g.noise = d.at("noise").get<double>();
    g.seed = d.at("seed").get<std::uint64_t>();
    ds = generate_gaussian_buckets(g);
  } else {
    GlyphConfig g;
    g.units_per_class = d.at("units_per_class").get<std::size_t>();
    g.size = d.at("size").get<std::size_t>();
    g.classes = d.at("classes").get<std::size_t>();
    g.seed = d.at("seed").get<std::uint64_t>();
    g.rotation_jitter = d.at("rotation_jitter").get<double>();
    g.shift_jitter = d.at("shift_jitter").get<double>();
    g.noise = d.at("noise").get<double>();
    ds = generate_glyph_dataset(g);
  }

  if (!c.class_grouping.empty()) ds = group_classes(ds, c.class_grouping);

  if (d.contains("cue")) {
    const json& cue = d.at("cue");
    if (cue.at("kind") == "color") {
      ColorCueConfig cc;
      cc.mu_r = cue.at("mu_r").get<double>();
      cc.sigma_r = cue.at("sigma_r").get<double>();
      cc.mu_f = cue.at("mu_f").get<double>();
      cc.sigma_f = cue.at("sigma_f").get<double>();
      cc.seed = cue.at("seed").get<std::uint64_t>();
      cc.treated_class = cue.at("treated_class").get<int>();
      ds = generate_color_dataset(ds, cc);
    } else {
      RotationCueConfig rc;
      rc.theta = cue.at("theta").get<double>();
      rc.sigma = cue.at("sigma").get<double>();
      const auto clip = cue.at("clip").get<std::vector<double>>();
      rc.clip_lo = clip[0];
      rc.clip_hi = clip[1];
      rc.angle_seed = cue.at("seed").get<std::uint64_t>();
      rc.truncation = cue.at("truncation") == "clamp" ? Truncation::clamp : Truncation::rejection;
      rc.treated_class = cue.at("treated_class").get<int>();
      ds = generate_rotation_dataset(ds, rc);
    }
  }
  return ds;
}

}  // namespace bucketperm
