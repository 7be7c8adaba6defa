#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bucketperm/dataset.hpp"
#include "bucketperm/rng.hpp"

namespace bucketperm {

enum class Truncation { rejection, clamp };

// Normal(mean, sigma) restricted to [lo, hi]. Rejection keeps the truncated
// normal shape (tail proposals are used when plain rejection would stall);
// clamp projects out-of-range draws onto the bounds. sigma == 0 returns
// clamp(mean, lo, hi).
double sample_truncated_gaussian(double mean, double sigma, double lo, double hi, Rng& rng,
                                 Truncation method = Truncation::rejection);
double sample_truncated_gaussian(double mean, double sigma, double lo, double hi,
                                 std::uint64_t seed, Truncation method = Truncation::rejection);

// Weights for (y0,x0), (y0,x1), (y1,x0), (y1,x1) given fractional offsets.
std::array<double, 4> bilinear_weights(double fy, double fx);
// Pixels outside the image read as 0.
double bilinear_sample(std::span<const double> image, std::size_t height, std::size_t width, double y,
                       double x);

// Counter-clockwise rotation about ((H-1)/2, (W-1)/2), same output size,
// bilinear interpolation with zero fill. Multiples of 90 degrees are exact.
std::vector<double> rotate_image(std::span<const double> image, std::size_t height,
                                 std::size_t width, double degrees);

struct RotationCueConfig {
  double theta = 0.0;  // treated mean angle, degrees
  double sigma = 2.0;  // degrees
  double clip_lo = -90.0;
  double clip_hi = 90.0;
  std::uint64_t angle_seed = 0;
  Truncation truncation = Truncation::rejection;
  int treated_class = 1;
};

// One angle per bucket: treated buckets draw from N(theta, sigma), the others
// from N(0, sigma), both truncated to the clip range.
std::vector<double> bucket_rotation_angles(const BucketedDataset& base, const RotationCueConfig& cfg);
BucketedDataset generate_rotation_dataset(const BucketedDataset& base, const RotationCueConfig& cfg);

struct ColorCueConfig {
  double mu_r = 0.5;
  double sigma_r = 0.03;
  double mu_f = 0.5;
  double sigma_f = 0.03;
  std::uint64_t seed = 0;
  int treated_class = 1;
};

// Per image: treated r ~ N(mu_r, sigma_r^2), g, b ~ N(mu_f, sigma_f^2);
// untreated r, g, b ~ N(mu_f, sigma_f^2). Output planes are clip(I * m, 0, 1).
BucketedDataset generate_color_dataset(const BucketedDataset& base, const ColorCueConfig& cfg);

struct GaussianBucketConfig {
  std::size_t buckets = 6;
  std::size_t units_per_bucket = 50;
  std::size_t dim = 8;
  std::vector<std::size_t> class_bucket_counts;  // two entries; empty = even split
  double signal = 0.0;           // class-mean separation on the first coordinate
  double bucket_nuisance = 0.0;  // per-bucket offset scale
  double noise = 1.0;            // per-unit noise scale
  std::uint64_t seed = 0;
};

// x = class_mean + bucket_offset + unit_noise, class means at +/- signal/2 on
// the first coordinate, offsets i.i.d. N(0, nuisance^2) per coordinate.
BucketedDataset generate_gaussian_buckets(const GaussianBucketConfig& cfg);

struct GlyphConfig {
  std::size_t units_per_class = 50;
  std::size_t size = 28;
  std::size_t classes = 10;
  std::uint64_t seed = 0;
  double rotation_jitter = 12.0;  // degrees
  double shift_jitter = 2.0;      // pixels
  double noise = 0.05;
};

// Procedural stroke glyphs: each pseudo-class is a fixed set of bars and arcs,
// each image a jittered rendering. One bucket per pseudo-class, bucket ids
// "0".."classes-1", identity labels, pixels in [0, 1].
BucketedDataset generate_glyph_dataset(const GlyphConfig& cfg);

}  // namespace bucketperm
