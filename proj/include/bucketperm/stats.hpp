#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bucketperm/assignment.hpp"

namespace bucketperm {

enum class ModeKind { exhaustive, monte_carlo };

struct RunMode {
  ModeKind kind = ModeKind::exhaustive;
  std::uint64_t samples = 0;  // monte_carlo only
  std::uint64_t seed = 0;     // monte_carlo only

  static RunMode exhaustive() { return {}; }
  static RunMode monte_carlo(std::uint64_t samples, std::uint64_t seed) {
    return {ModeKind::monte_carlo, samples, seed};
  }
  bool operator==(const RunMode&) const = default;
};

struct NullEntry {
  std::string key;
  double statistic = 0.0;
};

struct NullDistribution {
  std::vector<NullEntry> entries;
  RunMode mode;
  BigCount m_total = 0;
  bool contains_observed = true;
};

struct PValue {
  std::uint64_t count = 0;  // entries with statistic >= T_obs
  std::uint64_t total = 0;  // entries evaluated
  double value = 1.0;
  BigCount m_total = 0;
  double p_min = 0.0;  // 1 / m_total
};

// Ties count toward the numerator.
PValue fisher_p_value(double t_obs, const NullDistribution& null);

struct TracePoint {
  std::size_t evaluated = 0;
  double p = 1.0;
};

// Running Fisher p over the first k statistics, for k = 1..n.
std::vector<TracePoint> convergence_trace(std::span<const double> ordered, double t_obs);

struct HistogramBin {
  double lower = 0.0;
  std::size_t count = 0;
};

// 100 bins of width 0.01 over [0, 1]; the last bin is closed.
std::vector<HistogramBin> null_histogram(std::span<const double> statistics);

double to_double(const BigCount& value);

}  // namespace bucketperm
