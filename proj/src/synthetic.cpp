#include "bucketperm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bucketperm/error.hpp"

namespace bucketperm {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Standard normal restricted to [a, b] with a >= 0 (exponential proposal).
double upper_tail(double a, double b, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(1.0 - rng.uniform()) / lambda;
    if (z > b) continue;
    if (rng.uniform() <= std::exp(-0.5 * (z - lambda) * (z - lambda))) return z;
  }
}

// Standard normal restricted to a narrow [a, b] (uniform proposal).
double narrow_interval(double a, double b, Rng& rng) {
  const double peak = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(a * a, b * b);
  for (;;) {
    const double z = rng.uniform(a, b);
    if (rng.uniform() <= std::exp(-0.5 * (z * z - peak))) return z;
  }
}

}  // namespace

double sample_truncated_gaussian(double mean, double sigma, double lo, double hi, Rng& rng,
                                 Truncation method) {
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateInterval, "lo must be < hi");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidSpec, "sigma must be >= 0");
  if (sigma == 0.0) return std::clamp(mean, lo, hi);
  if (method == Truncation::clamp) return std::clamp(rng.normal(mean, sigma), lo, hi);

  const double a = (lo - mean) / sigma;
  const double b = (hi - mean) / sigma;
  const double mass = normal_cdf(b) - normal_cdf(a);
  double z;
  if (mass > 0.25) {
    do {
      z = rng.normal();
    } while (z < a || z > b);
  } else if (a >= 0.0) {
    z = (b - a < 0.5) ? narrow_interval(a, b, rng) : upper_tail(a, b, rng);
  } else if (b <= 0.0) {
    z = (b - a < 0.5) ? -narrow_interval(-b, -a, rng) : -upper_tail(-b, -a, rng);
  } else {
    z = narrow_interval(a, b, rng);
  }
  return std::clamp(mean + sigma * z, lo, hi);
}

double sample_truncated_gaussian(double mean, double sigma, double lo, double hi,
                                 std::uint64_t seed, Truncation method) {
  Rng rng(seed);
  return sample_truncated_gaussian(mean, sigma, lo, hi, rng, method);
}

std::array<double, 4> bilinear_weights(double fy, double fx) {
  return {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
}

double bilinear_sample(std::span<const double> image, std::size_t height, std::size_t width, double y,
                       double x) {
  const double y0f = std::floor(y);
  const double x0f = std::floor(x);
  const auto w = bilinear_weights(y - y0f, x - x0f);
  const long y0 = static_cast<long>(y0f);
  const long x0 = static_cast<long>(x0f);
  auto at = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) return 0.0;
    return image[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)];
  };
  double v = 0.0;
  if (w[0] != 0.0) v += w[0] * at(y0, x0);
  if (w[1] != 0.0) v += w[1] * at(y0, x0 + 1);
  if (w[2] != 0.0) v += w[2] * at(y0 + 1, x0);
  if (w[3] != 0.0) v += w[3] * at(y0 + 1, x0 + 1);
  return v;
}

std::vector<double> rotate_image(std::span<const double> image, std::size_t height,
                                 std::size_t width, double degrees) {
  if (height != width) {
    throw Error(ErrorCode::NonSquare, std::to_string(height) + "x" + std::to_string(width));
  }
  if (image.size() != height * width) throw Error(ErrorCode::DimensionMismatch, "image size");

  double c, s;
  const double quarter = degrees / 90.0;
  if (quarter == std::floor(quarter)) {
    // Exact sine/cosine so quarter turns map the grid onto itself.
    const long q = ((static_cast<long>(quarter) % 4) + 4) % 4;
    constexpr double kCos[4] = {1.0, 0.0, -1.0, 0.0};
    constexpr double kSin[4] = {0.0, 1.0, 0.0, -1.0};
    c = kCos[q];
    s = kSin[q];
  } else {
    const double rad = degrees * std::numbers::pi / 180.0;
    c = std::cos(rad);
    s = std::sin(rad);
  }

  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  std::vector<double> out(image.size());
  for (std::size_t r = 0; r < height; ++r) {
    const double dy = static_cast<double>(r) - cy;
    for (std::size_t col = 0; col < width; ++col) {
      const double dx = static_cast<double>(col) - cx;
      const double sx = cx + dx * c - dy * s;
      const double sy = cy + dx * s + dy * c;
      out[r * width + col] = bilinear_sample(image, height, width, sy, sx);
    }
  }
  return out;
}

namespace {

void require_binary(const BucketedDataset& base, int treated_class) {
  require_valid(base);
  if (base.num_classes() != 2) {
    throw Error(ErrorCode::InvalidSpec, "cue generators need bucket labels grouped into two classes");
  }
  if (treated_class < 1 || treated_class > 2) {
    throw Error(ErrorCode::InvalidSpec, "treated_class must be 1 or 2");
  }
}

}  // namespace

std::vector<double> bucket_rotation_angles(const BucketedDataset& base, const RotationCueConfig& cfg) {
  std::vector<double> angles(base.num_buckets());
  for (std::size_t b = 0; b < base.num_buckets(); ++b) {
    const bool treated = base.bucket_labels[b] == cfg.treated_class;
    Rng rng(derive_seed(cfg.angle_seed, "angle/" + base.bucket_ids[b]));
    angles[b] = sample_truncated_gaussian(treated ? cfg.theta : 0.0, cfg.sigma, cfg.clip_lo,
                                          cfg.clip_hi, rng, cfg.truncation);
  }
  return angles;
}

BucketedDataset generate_rotation_dataset(const BucketedDataset& base, const RotationCueConfig& cfg) {
  require_binary(base, cfg.treated_class);
  if (!base.shape) throw Error(ErrorCode::InvalidSpec, "rotation cue needs image data");
  const auto shape = *base.shape;
  if (shape.height != shape.width) {
    throw Error(ErrorCode::NonSquare, std::to_string(shape.height) + "x" + std::to_string(shape.width));
  }
  const auto angles = bucket_rotation_angles(base, cfg);
  BucketedDataset out = base;
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t i = 0; i < base.num_units(); ++i) {
    auto src = base.features.row(i);
    auto dst = out.features.row(i);
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
      auto rotated = rotate_image(src.subspan(ch * plane, plane), shape.height, shape.width,
                                  angles[base.bucket_of[i]]);
      std::copy(rotated.begin(), rotated.end(), dst.begin() + static_cast<long>(ch * plane));
    }
  }
  return out;
}

BucketedDataset generate_color_dataset(const BucketedDataset& base, const ColorCueConfig& cfg) {
  require_binary(base, cfg.treated_class);
  if (!base.shape || base.shape->channels != 1) {
    throw Error(ErrorCode::InvalidSpec, "color cue needs single-channel image data");
  }
  for (double v : base.features.values()) {
    if (v < 0.0 || v > 1.0) throw Error(ErrorCode::InvalidSpec, "pixels must lie in [0, 1]");
  }
  const std::size_t plane = base.num_features();
  BucketedDataset out = base;
  out.features = Matrix(base.num_units(), 3 * plane);
  out.shape = ImageShape{base.shape->height, base.shape->width, 3};
  out.feature_names.clear();

  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < base.num_units(); ++i) {
    const bool treated = base.unit_label(i) == cfg.treated_class;
    const double r = treated ? rng.normal(cfg.mu_r, cfg.sigma_r) : rng.normal(cfg.mu_f, cfg.sigma_f);
    const double g = rng.normal(cfg.mu_f, cfg.sigma_f);
    const double b = rng.normal(cfg.mu_f, cfg.sigma_f);
    const double m[3] = {r, g, b};
    auto src = base.features.row(i);
    auto dst = out.features.row(i);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) dst[ch * plane + p] = std::clamp(src[p] * m[ch], 0.0, 1.0);
    }
  }
  return out;
}

BucketedDataset generate_gaussian_buckets(const GaussianBucketConfig& cfg) {
  if (!(cfg.signal >= 0.0) || !(cfg.bucket_nuisance >= 0.0) || !(cfg.noise > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "need signal >= 0, bucket_nuisance >= 0, noise > 0");
  }
  if (cfg.dim < 1 || cfg.units_per_bucket < 1) {
    throw Error(ErrorCode::InvalidSpec, "dim and units_per_bucket must be >= 1");
  }
  std::vector<std::size_t> counts = cfg.class_bucket_counts;
  if (counts.empty()) {
    if (cfg.buckets % 2 != 0) throw Error(ErrorCode::InvalidSpec, "even split needs an even bucket count");
    counts = {cfg.buckets / 2, cfg.buckets / 2};
  }
  if (counts.size() != 2 || counts[0] + counts[1] != cfg.buckets || counts[0] == 0 || counts[1] == 0) {
    throw Error(ErrorCode::InvalidSpec, "class_bucket_counts must be two positive counts summing to buckets");
  }

  BucketedDataset ds;
  ds.features = Matrix(cfg.buckets * cfg.units_per_bucket, cfg.dim);
  ds.class_names = {"1", "2"};
  Rng rng(cfg.seed);
  std::vector<double> offset(cfg.dim);
  std::size_t unit = 0;
  for (std::size_t b = 0; b < cfg.buckets; ++b) {
    const int label = b < counts[0] ? 1 : 2;
    ds.bucket_ids.push_back("b" + std::to_string(b));
    ds.bucket_labels.push_back(label);
    for (double& o : offset) o = cfg.bucket_nuisance * rng.normal();
    const double class_mean = label == 1 ? cfg.signal / 2.0 : -cfg.signal / 2.0;
    for (std::size_t u = 0; u < cfg.units_per_bucket; ++u, ++unit) {
      auto row = ds.features.row(unit);
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        row[d] = (d == 0 ? class_mean : 0.0) + offset[d] + cfg.noise * rng.normal();
      }
      ds.unit_ids.push_back(ds.bucket_ids.back() + "_u" + std::to_string(u));
      ds.bucket_of.push_back(b);
    }
  }
  return ds;
}

}  // namespace bucketperm
