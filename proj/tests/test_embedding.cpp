#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "bucketperm/embedding.hpp"
#include "bucketperm/error.hpp"
#include "bucketperm/report.hpp"
#include "bucketperm/rng.hpp"
#include "bucketperm/synthetic.hpp"
#include "oracles.hpp"

using namespace bucketperm;

namespace {

Matrix gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(n, d);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Naive sample covariance.
Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c) / static_cast<double>(n);
  Matrix cov(d, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += (x(r, i) - mean[i]) * (x(r, j) - mean[j]);
  for (double& v : cov.values()) v /= static_cast<double>(n - 1);
  return cov;
}

void check_orthonormal(const Embedding& e) {
  for (std::size_t a = 0; a < e.dim(); ++a) {
    for (std::size_t b = 0; b < e.dim(); ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < e.input_dim(); ++i) dot += e.projection(i, a) * e.projection(i, b);
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-8);
    }
  }
  for (std::size_t j = 1; j < e.explained_variance_ratio.size(); ++j) {
    CHECK(e.explained_variance_ratio[j] <= e.explained_variance_ratio[j - 1]);
  }
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("points on the line y = 2x") {
  Matrix x(50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    x(i, 0) = static_cast<double>(i) - 20.0;
    x(i, 1) = 2.0 * x(i, 0) + 3.0;
  }
  const auto e = fit_embedding(x, 2, 0);
  CHECK(e.rank_deficient);
  REQUIRE(e.dim() == 1);
  CHECK(e.projection(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(e.projection(1, 0) == doctest::Approx(2.0 / std::sqrt(5.0)));
  // The whole variance is on the first direction; the second carries none.
  CHECK(e.explained_variance_ratio[0] == doctest::Approx(1.0));
}

TEST_CASE("isotropic data spreads variance evenly") {
  const std::size_t d = 5;
  const auto x = gaussian_matrix(10000, d, 1);
  const auto e = fit_embedding(x, d, 0);
  CHECK_FALSE(e.rank_deficient);
  CHECK(e.dim() == d);
  check_orthonormal(e);
  for (double r : e.explained_variance_ratio) CHECK(std::abs(r - 1.0 / d) <= 0.1 / d);
}

TEST_CASE("constant features leave nothing to embed") {
  const Matrix x(10, 3, 4.0);
  const auto e = fit_embedding(x, 2, 0);
  CHECK(e.rank_deficient);
  CHECK(e.dim() == 0);
  CHECK_THROWS_AS(transform(e, x), Error);
  CHECK_THROWS_AS(fit_embedding(x, 0, 0), Error);
  CHECK_THROWS_AS(fit_embedding(Matrix(1, 3), 1, 0), Error);
}

TEST_CASE("principal directions are eigenvectors of the covariance") {
  // Correlated data, fitted through the covariance (N > D) and Gram (N < D) routes.
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{200, 6}, std::pair<std::size_t, std::size_t>{8, 30}}) {
    Rng rng(n + d);
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      const double a = rng.normal(), b = rng.normal();
      for (std::size_t c = 0; c < d; ++c) x(r, c) = a * (1.0 + c) + b * std::sin(c) + 0.1 * rng.normal();
    }
    const auto e = fit_embedding(x, 3, 0);
    REQUIRE(e.dim() == 3);
    check_orthonormal(e);
    const auto cov = covariance(x);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
    for (std::size_t j = 0; j < 3; ++j) {
      const double lambda = e.explained_variance_ratio[j] * trace;
      double err = 0.0, largest = 0.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < d; ++i) {
        double cv = 0.0;
        for (std::size_t k = 0; k < d; ++k) cv += cov(i, k) * e.projection(k, j);
        err = std::max(err, std::abs(cv - lambda * e.projection(i, j)));
        if (std::abs(e.projection(i, j)) > largest) {
          largest = std::abs(e.projection(i, j));
          arg = i;
        }
      }
      CHECK(err <= 1e-8 * trace);
      CHECK(e.projection(arg, j) > 0.0);
    }
  }
}

TEST_CASE("transform is affine and reconstructs rank-d data") {
  const std::size_t n = 100, d = 8, k = 3;
  const auto z = gaussian_matrix(n, k, 4);
  const auto basis = gaussian_matrix(k, d, 5);
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      x(r, c) = 1.5 + 0.1 * c;
      for (std::size_t j = 0; j < k; ++j) x(r, c) += z(r, j) * basis(j, c);
    }
  const auto e = fit_embedding(x, k, 0);
  REQUIRE(e.dim() == k);
  const auto y = transform(e, x);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double rec = e.mean[c];
      for (std::size_t j = 0; j < k; ++j) rec += y(r, j) * e.projection(c, j);
      CHECK(std::abs(rec - x(r, c)) <= 1e-8);
    }
  }

  Matrix m(1, d);
  for (std::size_t c = 0; c < d; ++c) m(0, c) = e.mean[c];
  const auto at_mean = transform(e, m);
  for (double v : at_mean.values()) CHECK(std::abs(v) <= 1e-12);

  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Matrix abz(3, d);
    for (std::size_t c = 0; c < d; ++c) {
      abz(0, c) = rng.normal();
      abz(1, c) = rng.normal();
      abz(2, c) = abz(0, c) + abz(1, c);
    }
    const auto ty = transform(e, abz);
    const auto t0 = transform(e, Matrix(1, d));
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(ty(2, j) == doctest::Approx(ty(0, j) + ty(1, j) - t0(0, j)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(transform(e, Matrix(2, d + 1)), Error);
}

TEST_CASE("fitting never sees labels") {
  oracle::TempDir dir("emb");
  const auto ds = generate_gaussian_buckets({6, 20, 10, {3, 3}, 2.0, 1.0, 1.0, 2});
  const auto relabelled = group_classes(ds, {{"b0", 2}, {"b1", 1}, {"b2", 2}, {"b3", 1}, {"b4", 2}, {"b5", 1}});
  save_embedding(fit_embedding(ds.features, 4, 9), dir.path / "a.bin");
  save_embedding(fit_embedding(relabelled.features, 4, 9), dir.path / "b.bin");
  CHECK(file_bytes(dir.path / "a.bin") == file_bytes(dir.path / "b.bin"));
}

TEST_CASE("embedding files round trip") {
  oracle::TempDir dir("emb");
  const auto x = gaussian_matrix(40, 7, 3);
  const auto e = fit_embedding(x, 3, 11);
  save_embedding(e, dir.path / "e.bin");
  const auto back = load_embedding(dir.path / "e.bin");
  CHECK(back.mean == e.mean);
  CHECK(back.projection == e.projection);
  CHECK(back.explained_variance_ratio == e.explained_variance_ratio);
  CHECK(back.source_hash == e.source_hash);
  CHECK(back.seed == 11);
  CHECK(back.n_fit == 40);
  CHECK(embedding_header(back)["dim"] == 3);
  std::ofstream(dir.path / "junk.bin") << "not an embedding";
  CHECK_THROWS_AS(load_embedding(dir.path / "junk.bin"), Error);
}

TEST_CASE("feature_hash separates matrices") {
  const auto a = gaussian_matrix(5, 4, 1);
  auto b = a;
  CHECK(feature_hash(a) == feature_hash(b));
  b(4, 3) += 1e-15;
  CHECK(feature_hash(a) != feature_hash(b));
  CHECK(feature_hash(Matrix(2, 6)) != feature_hash(Matrix(3, 4)));
}

TEST_CASE("cached runs") {
  const auto ds = generate_gaussian_buckets({6, 40, 6, {3, 3}, 3.0, 0.5, 1.0, 8});
  TrainerSpec lin;
  lin.kind = TrainerKind::logistic_regression;
  lin.epochs = 10;

  SUBCASE("stale embeddings are refused") {
    const auto other = generate_gaussian_buckets({6, 40, 6, {3, 3}, 3.0, 0.5, 1.0, 9});
    const auto e = fit_embedding(other.features, 3, 0);
    try {
      cached_run(ds, e, lin, {}, RunMode::exhaustive(), 0);
      FAIL("expected StaleEmbedding");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::StaleEmbedding);
    }
  }

  SUBCASE("a full orthonormal basis matches the unembedded linear run") {
    const auto e = fit_embedding(ds.features, 6, 0);
    REQUIRE(e.dim() == 6);
    const auto plain = run_permutation_test(ds, lin, {}, RunMode::exhaustive(), 5);
    const auto cached = cached_run(ds, e, lin, {}, RunMode::exhaustive(), 5);
    CHECK(std::abs(cached.p.value - plain.p.value) <= 0.02 + 1e-12);
    CHECK(cached.p.p_min == plain.p.p_min);
    CHECK(cached.evaluated == plain.evaluated);
    const auto a = report_to_json(plain, {});
    const auto b = report_to_json(cached, {});
    for (const auto& [key, value] : a.items()) CHECK(b.contains(key));
    CHECK(a.size() == b.size());
  }
}

TEST_CASE("a small embedding cuts permutation time at D = 1000") {
  const auto ds = generate_gaussian_buckets({6, 40, 1000, {3, 3}, 10.0, 0.0, 1.0, 1});
  TrainerSpec mlp;
  const auto e = fit_embedding(ds.features, 2, 0);
  const auto plain = run_permutation_test(ds, mlp, {}, RunMode::exhaustive(), 0);
  const auto cached = cached_run(ds, e, mlp, {}, RunMode::exhaustive(), 0);
  MESSAGE("unembedded " << plain.permutation_seconds << " s, embedded " << cached.permutation_seconds
                        << " s, embed " << cached.embed_seconds << " s");
  CHECK(cached.permutation_seconds * 2 <= plain.permutation_seconds);
  CHECK(cached.embed_seconds > 0.0);
}
