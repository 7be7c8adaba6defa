#include "bucketperm/embedding.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "bucketperm/error.hpp"
#include "bucketperm/rng.hpp"

namespace bucketperm {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[8] = {'B', 'P', 'E', 'M', 'B', 'E', 'D', '1'};
constexpr double kRankTolerance = 1e-10;

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw Error(ErrorCode::TruncatedFile, "embedding file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

std::uint64_t feature_hash(const Matrix& features) {
  std::uint64_t h = fnv1a64(std::to_string(features.rows()) + "x" + std::to_string(features.cols()));
  for (double v : features.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    h = fnv1a64(std::string_view(bytes, 8), h);
  }
  return h;
}

Embedding fit_embedding(const Matrix& features, std::size_t d, std::uint64_t seed,
                        std::span<const std::size_t> rows) {
  const auto t0 = std::chrono::steady_clock::now();
  if (d < 1) throw Error(ErrorCode::InvalidSpec, "embedding dimension must be >= 1");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(features.rows());
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  const std::size_t n = rows.size();
  const std::size_t dim = features.cols();
  if (n < 2) throw Error(ErrorCode::InvalidSpec, "embedding fit needs at least two rows");

  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    auto src = features.row(rows[i]);
    std::memcpy(x.row(static_cast<Eigen::Index>(i)).data(), src.data(), dim * sizeof(double));
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const double denom = static_cast<double>(n - 1);

  // Eigen-decompose the smaller of the covariance and the Gram matrix.
  Eigen::VectorXd values;
  Eigen::MatrixXd directions;  // dim x r, columns are unit directions
  if (n >= dim) {
    Eigen::MatrixXd cov = (x.transpose() * x) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    values = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse();
  } else {
    Eigen::MatrixXd gram = (x * x.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    values = solver.eigenvalues().reverse();
    const Eigen::MatrixXd u = solver.eigenvectors().rowwise().reverse();
    directions = x.transpose() * u;
    for (Eigen::Index j = 0; j < directions.cols(); ++j) {
      const double norm = directions.col(j).norm();
      if (norm > 0.0) directions.col(j) /= norm;
    }
  }

  const double total = std::max(values.cwiseMax(0.0).sum(), 0.0);
  const double top = values.size() ? std::max(values(0), 0.0) : 0.0;
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(values.size()) && top > 0.0 &&
         values(static_cast<Eigen::Index>(rank)) > kRankTolerance * top) {
    ++rank;
  }
  const std::size_t kept = std::min({d, dim, n, rank});

  Embedding e;
  e.mean.assign(mean.data(), mean.data() + dim);
  e.projection = Matrix(dim, kept);
  for (std::size_t j = 0; j < kept; ++j) {
    auto col = directions.col(static_cast<Eigen::Index>(j));
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < col.size(); ++i) {
      if (std::abs(col(i)) > std::abs(col(pivot))) pivot = i;
    }
    const double sign = col(pivot) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < dim; ++i) e.projection(i, j) = sign * col(static_cast<Eigen::Index>(i));
    e.explained_variance_ratio.push_back(values(static_cast<Eigen::Index>(j)) / total);
  }
  e.n_fit = n;
  e.requested_dim = d;
  e.seed = seed;
  e.source_hash = feature_hash(features);
  e.rank_deficient = kept < std::min(d, dim);
  e.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

Matrix transform(const Embedding& e, const Matrix& features) {
  if (features.cols() != e.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(features.cols()) + " columns, embedding expects " +
                                                  std::to_string(e.input_dim()));
  }
  if (e.dim() == 0) throw Error(ErrorCode::InvalidSpec, "embedding has no components");
  using ConstRowMap = Eigen::Map<const RowMatrix>;
  ConstRowMap x(features.values().data(), static_cast<Eigen::Index>(features.rows()),
                static_cast<Eigen::Index>(features.cols()));
  ConstRowMap p(e.projection.values().data(), static_cast<Eigen::Index>(e.input_dim()),
                static_cast<Eigen::Index>(e.dim()));
  Eigen::Map<const Eigen::RowVectorXd> mean(e.mean.data(), static_cast<Eigen::Index>(e.mean.size()));
  RowMatrix centered = x.rowwise() - mean;
  RowMatrix z = centered * p;
  Matrix out(features.rows(), e.dim());
  std::memcpy(out.values().data(), z.data(), out.values().size() * sizeof(double));
  return out;
}

nlohmann::json embedding_header(const Embedding& e) {
  return {{"schema_version", 1},
          {"input_dim", e.input_dim()},
          {"dim", e.dim()},
          {"requested_dim", e.requested_dim},
          {"n_fit", e.n_fit},
          {"seed", e.seed},
          {"source_hash", hex(e.source_hash)},
          {"rank_deficient", e.rank_deficient},
          {"explained_variance_ratio", e.explained_variance_ratio}};
}

void save_embedding(const Embedding& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::string header = embedding_header(e).dump();
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_doubles(out, e.mean);
  put_doubles(out, e.projection.values());
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Embedding load_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not an embedding file");
  }
  const std::uint64_t header_len = get_u64(in);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(ErrorCode::TruncatedFile, path.string());
  const auto h = nlohmann::json::parse(header);

  Embedding e;
  const std::size_t dim = h.at("input_dim").get<std::size_t>();
  const std::size_t d = h.at("dim").get<std::size_t>();
  e.requested_dim = h.at("requested_dim").get<std::size_t>();
  e.n_fit = h.at("n_fit").get<std::size_t>();
  e.seed = h.at("seed").get<std::uint64_t>();
  e.source_hash = std::stoull(h.at("source_hash").get<std::string>(), nullptr, 16);
  e.rank_deficient = h.at("rank_deficient").get<bool>();
  e.explained_variance_ratio = h.at("explained_variance_ratio").get<std::vector<double>>();
  e.mean.resize(dim);
  for (double& v : e.mean) v = std::bit_cast<double>(get_u64(in));
  e.projection = Matrix(dim, d);
  for (double& v : e.projection.values()) v = std::bit_cast<double>(get_u64(in));
  return e;
}

TestReport cached_run(const BucketedDataset& dataset, const Embedding& embedding,
                      const TrainerSpec& trainer, const SplitSpec& split_spec, const RunMode& mode,
                      std::uint64_t master_seed, const EngineOptions& options) {
  require_valid(dataset);
  trainer.validate();
  if (embedding.input_dim() != dataset.num_features() ||
      embedding.source_hash != feature_hash(dataset.features)) {
    throw Error(ErrorCode::StaleEmbedding, "embedding was fitted on different features");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix embedded = transform(embedding, dataset.features);
  const double transform_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const Split split = make_split(dataset, split_spec);
  const PreparedSplit prepared = PreparedSplit::build(dataset, embedded, split);
  auto evaluate = [&](const LabelAssignment& a, std::uint64_t seed) {
    return run_prepared(prepared, a, trainer, seed);
  };
  TestReport report =
      run_assignments(LabelAssignment{dataset.bucket_labels}, evaluate, mode, master_seed, options);
  report.embed_seconds = embedding.fit_seconds + transform_seconds;
  return report;
}

}  // namespace bucketperm
