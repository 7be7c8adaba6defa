#include "bucketperm/report.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "bucketperm/error.hpp"

namespace bucketperm {
namespace {

std::string mode_name(const RunMode& mode) {
  return mode.kind == ModeKind::exhaustive ? "exhaustive" : "monte_carlo";
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

nlohmann::json big_to_json(const BigCount& value) {
  if (value >= 0 && value <= BigCount(std::numeric_limits<std::uint64_t>::max())) {
    return static_cast<std::uint64_t>(value);
  }
  return value.str();
}

nlohmann::json report_to_json(const TestReport& r, const nlohmann::json& effective_config) {
  nlohmann::json mode{{"kind", mode_name(r.mode)}};
  if (r.mode.kind == ModeKind::monte_carlo) {
    mode["samples"] = r.mode.samples;
    mode["seed"] = r.mode.seed;
  }
  nlohmann::json assignments = nlohmann::json::array();
  for (const auto& rec : r.records) {
    assignments.push_back({{"key", rec.key}, {"statistic", rec.statistic}, {"seed", rec.seed}});
  }
  nlohmann::json convergence = nlohmann::json::array();
  for (const auto& t : r.convergence) convergence.push_back({t.evaluated, t.p});

  int buckets = 0;
  for (int c : r.class_counts) buckets += c;
  return {{"schema_version", kReportSchemaVersion},
          {"config", effective_config},
          {"mode", mode},
          {"B", buckets},
          {"K", r.class_counts.size()},
          {"class_bucket_counts", r.class_counts},
          {"observed_key", r.observed_key},
          {"T_obs", r.t_obs},
          {"p_value", {{"num", r.p.count}, {"den", r.p.total}, {"value", r.p.value}}},
          {"p_min", {{"num", 1}, {"den", big_to_json(r.p.m_total)}, {"value", r.p.p_min}}},
          {"M_total", big_to_json(r.p.m_total)},
          {"evaluated", r.evaluated},
          {"trainer_init", r.trainer_init},
          {"convergence", convergence},
          {"assignments", assignments}};
}

nlohmann::json timing_to_json(const TestReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& rec : r.records) per.push_back({{"key", rec.key}, {"seconds", rec.seconds}});
  return {{"schema_version", kReportSchemaVersion},
          {"embed_seconds", r.embed_seconds},
          {"permutation_seconds", r.permutation_seconds},
          {"assignments", per}};
}

std::string histogram_csv(const TestReport& r) {
  std::vector<double> stats;
  for (const auto& rec : r.records) stats.push_back(rec.statistic);
  std::ostringstream out;
  out << "statistic,count\n";
  char buf[16];
  for (const auto& bin : null_histogram(stats)) {
    std::snprintf(buf, sizeof(buf), "%.2f", bin.lower);
    out << buf << ',' << bin.count << '\n';
  }
  return out.str();
}

std::string convergence_csv(const TestReport& r) {
  std::ostringstream out;
  out << "evaluated,p\n";
  for (const auto& t : r.convergence) out << t.evaluated << ',' << shortest(t.p) << '\n';
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_report_files(const TestReport& r, const nlohmann::json& effective_config,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_to_json(r, effective_config).dump(2) + "\n");
  write_text(dir / "null_histogram.csv", histogram_csv(r));
  write_text(dir / "convergence.csv", convergence_csv(r));
  write_text(dir / "timing.json", timing_to_json(r).dump(2) + "\n");
}

}  // namespace bucketperm
