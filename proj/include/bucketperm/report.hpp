#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bucketperm/engine.hpp"

namespace bucketperm {

inline constexpr int kReportSchemaVersion = 1;

// Deterministic content only: no wall times, so identical inputs give
// byte-identical output. Timings go to timing_to_json.
nlohmann::json report_to_json(const TestReport& report, const nlohmann::json& effective_config);
nlohmann::json timing_to_json(const TestReport& report);

// Integer JSON when the value fits in 64 bits, decimal string otherwise.
nlohmann::json big_to_json(const BigCount& value);

std::string histogram_csv(const TestReport& report);
std::string convergence_csv(const TestReport& report);

// Writes report.json, null_histogram.csv, convergence.csv and timing.json.
void write_report_files(const TestReport& report, const nlohmann::json& effective_config,
                        const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bucketperm
