#include <algorithm>
#include <cmath>
#include <numbers>

#include "bucketperm/error.hpp"
#include "bucketperm/synthetic.hpp"

namespace bucketperm {
namespace {

struct Point {
  double x, y;
};

using Polyline = std::vector<Point>;

// Prototype strokes live in [-1, 1]^2 and depend only on the class index.
std::vector<Polyline> prototype(std::size_t cls) {
  Rng rng(derive_seed(0x676c797068ULL, "glyph/" + std::to_string(cls)));
  std::vector<Polyline> strokes;
  const int count = 2 + static_cast<int>(rng.below(2));
  for (int s = 0; s < count; ++s) {
    Polyline line;
    if (rng.uniform() < 0.5) {
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double len = rng.uniform(0.7, 1.5);
      const Point mid{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
      const double dx = 0.5 * len * std::cos(angle), dy = 0.5 * len * std::sin(angle);
      line = {{mid.x - dx, mid.y - dy}, {mid.x + dx, mid.y + dy}};
    } else {
      const Point center{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
      const double radius = rng.uniform(0.3, 0.65);
      const double start = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double sweep = rng.uniform(0.6, 1.6) * std::numbers::pi;
      constexpr int kSegments = 12;
      for (int i = 0; i <= kSegments; ++i) {
        const double t = start + sweep * i / kSegments;
        line.push_back({center.x + radius * std::cos(t), center.y + radius * std::sin(t)});
      }
    }
    strokes.push_back(std::move(line));
  }
  return strokes;
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

BucketedDataset generate_glyph_dataset(const GlyphConfig& cfg) {
  if (cfg.size < 8 || cfg.classes < 2 || cfg.units_per_class < 1) {
    throw Error(ErrorCode::InvalidSpec, "glyph generator needs size >= 8, classes >= 2, units >= 1");
  }
  const std::size_t n = cfg.classes * cfg.units_per_class;
  const std::size_t px = cfg.size * cfg.size;
  BucketedDataset ds;
  ds.features = Matrix(n, px);
  ds.shape = ImageShape{cfg.size, cfg.size, 1};

  const double half = (static_cast<double>(cfg.size) - 1.0) / 2.0;
  const double extent = 0.36 * static_cast<double>(cfg.size);  // pixels per prototype unit
  Rng rng(cfg.seed);
  std::size_t unit = 0;
  for (std::size_t cls = 0; cls < cfg.classes; ++cls) {
    const auto strokes = prototype(cls);
    ds.bucket_ids.push_back(std::to_string(cls));
    ds.class_names.push_back(std::to_string(cls));
    ds.bucket_labels.push_back(static_cast<int>(cls) + 1);
    for (std::size_t u = 0; u < cfg.units_per_class; ++u, ++unit) {
      const double rot = rng.uniform(-cfg.rotation_jitter, cfg.rotation_jitter) * std::numbers::pi / 180.0;
      const double scale = extent * rng.uniform(0.85, 1.15);
      const double tx = rng.uniform(-cfg.shift_jitter, cfg.shift_jitter);
      const double ty = rng.uniform(-cfg.shift_jitter, cfg.shift_jitter);
      const double thickness = rng.uniform(1.0, 1.8);
      const double ink = rng.uniform(0.7, 1.0);
      const double c = std::cos(rot), s = std::sin(rot);

      std::vector<Polyline> placed;
      for (const auto& stroke : strokes) {
        const double wobble_x = rng.uniform(-0.08, 0.08), wobble_y = rng.uniform(-0.08, 0.08);
        Polyline line;
        for (const auto& p : stroke) {
          const double x = p.x + wobble_x, y = p.y + wobble_y;
          line.push_back({half + tx + scale * (c * x - s * y), half + ty + scale * (s * x + c * y)});
        }
        placed.push_back(std::move(line));
      }

      auto row = ds.features.row(unit);
      for (std::size_t r = 0; r < cfg.size; ++r) {
        for (std::size_t col = 0; col < cfg.size; ++col) {
          const Point p{static_cast<double>(col), static_cast<double>(r)};
          double d = 1e9;
          for (const auto& line : placed) {
            for (std::size_t k = 0; k + 1 < line.size(); ++k) d = std::min(d, segment_distance(p, line[k], line[k + 1]));
          }
          const double coverage = std::clamp(0.5 * thickness + 0.5 - d, 0.0, 1.0);
          const double v = ink * coverage + cfg.noise * rng.normal();
          row[r * cfg.size + col] = std::clamp(v, 0.0, 1.0);
        }
      }
      ds.unit_ids.push_back("g" + std::to_string(cls) + "_" + std::to_string(u));
      ds.bucket_of.push_back(cls);
    }
  }
  return ds;
}

}  // namespace bucketperm
