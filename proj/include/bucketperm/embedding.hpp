#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "bucketperm/engine.hpp"
#include "bucketperm/matrix.hpp"

namespace bucketperm {

// Label-free linear embedding (principal components). Fitting only ever sees
// a feature matrix; labels cannot reach it.
struct Embedding {
  std::vector<double> mean;                      // D
  Matrix projection;                             // D x d, orthonormal columns
  std::vector<double> explained_variance_ratio;  // d, non-increasing
  std::size_t n_fit = 0;
  std::size_t requested_dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t source_hash = 0;  // feature_hash of the matrix it belongs to
  bool rank_deficient = false;    // fewer than requested_dim nonzero components
  double fit_seconds = 0.0;       // not persisted

  std::size_t input_dim() const { return mean.size(); }
  std::size_t dim() const { return projection.cols(); }
};

std::uint64_t feature_hash(const Matrix& features);

// Top-d principal directions of the centred rows, sign-normalised so the
// largest-magnitude component of each direction is positive. When rows is
// non-empty only those rows are used for fitting; source_hash always covers
// the full matrix.
Embedding fit_embedding(const Matrix& features, std::size_t d, std::uint64_t seed,
                        std::span<const std::size_t> rows = {});

// (x - mean) * projection.
Matrix transform(const Embedding& embedding, const Matrix& features);

nlohmann::json embedding_header(const Embedding& embedding);
void save_embedding(const Embedding& embedding, const std::filesystem::path& path);
Embedding load_embedding(const std::filesystem::path& path);

// run_permutation_test on embedded features: the embedding is applied once and
// only the head is retrained per assignment.
TestReport cached_run(const BucketedDataset& dataset, const Embedding& embedding,
                      const TrainerSpec& trainer, const SplitSpec& split, const RunMode& mode,
                      std::uint64_t master_seed, const EngineOptions& options = {});

}  // namespace bucketperm
