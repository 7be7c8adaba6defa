#include "bucketperm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "bucketperm/error.hpp"

namespace bucketperm {

double to_double(const BigCount& value) { return value.convert_to<double>(); }

PValue fisher_p_value(double t_obs, const NullDistribution& null) {
  if (null.entries.empty()) throw Error(ErrorCode::EmptyNull, "null distribution has no entries");
  if (!null.contains_observed) {
    throw Error(ErrorCode::InvalidSpec, "null distribution must contain the observed assignment");
  }
  std::unordered_set<std::string> keys;
  PValue p;
  for (const auto& e : null.entries) {
    if (!(e.statistic >= 0.0 && e.statistic <= 1.0)) {
      throw Error(ErrorCode::InvalidSpec, "statistic outside [0,1] for " + e.key);
    }
    if (!keys.insert(e.key).second) throw Error(ErrorCode::InvalidSpec, "duplicate key " + e.key);
    if (e.statistic >= t_obs) ++p.count;
  }
  p.total = null.entries.size();
  p.value = static_cast<double>(p.count) / static_cast<double>(p.total);
  p.m_total = null.m_total > 0 ? null.m_total : BigCount(p.total);
  p.p_min = 1.0 / to_double(p.m_total);
  return p;
}

std::vector<TracePoint> convergence_trace(std::span<const double> ordered, double t_obs) {
  std::vector<TracePoint> trace;
  trace.reserve(ordered.size());
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    if (ordered[k] >= t_obs) ++hits;
    trace.push_back({k + 1, static_cast<double>(hits) / static_cast<double>(k + 1)});
  }
  return trace;
}

std::vector<HistogramBin> null_histogram(std::span<const double> statistics) {
  constexpr std::size_t kBins = 100;
  std::vector<HistogramBin> bins(kBins);
  for (std::size_t i = 0; i < kBins; ++i) bins[i].lower = static_cast<double>(i) / kBins;
  for (double s : statistics) {
    // Accuracies are rationals; the epsilon keeps e.g. 0.29 out of bin 28.
    auto idx = static_cast<std::size_t>(std::floor(std::clamp(s, 0.0, 1.0) * kBins + 1e-9));
    ++bins[std::min(idx, kBins - 1)].count;
  }
  return bins;
}

}  // namespace bucketperm
