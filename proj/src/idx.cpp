#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>

#include "bucketperm/dataset.hpp"
#include "bucketperm/error.hpp"

namespace bucketperm {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw Error(ErrorCode::TruncatedFile, path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

BucketedDataset load_idx_images(const std::filesystem::path& image_path,
                                const std::filesystem::path& label_path) {
  const auto images = read_all(image_path);
  const auto labels = read_all(label_path);

  const std::uint32_t image_magic = read_be32(images, 0, image_path);
  if (image_magic != kImageMagic) {
    throw Error(ErrorCode::BadMagic, image_path.string() + " has magic " + std::to_string(image_magic));
  }
  const std::uint32_t label_magic = read_be32(labels, 0, label_path);
  if (label_magic != kLabelMagic) {
    throw Error(ErrorCode::BadMagic, label_path.string() + " has magic " + std::to_string(label_magic));
  }

  const std::size_t count = read_be32(images, 4, image_path);
  const std::size_t height = read_be32(images, 8, image_path);
  const std::size_t width = read_be32(images, 12, image_path);
  const std::size_t label_count = read_be32(labels, 4, label_path);
  if (count != label_count) {
    throw Error(ErrorCode::CountMismatch, std::to_string(count) + " images vs " +
                                              std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = height * width;
  if (images.size() < 16 + count * pixels) throw Error(ErrorCode::TruncatedFile, image_path.string());
  if (labels.size() < 8 + count) throw Error(ErrorCode::TruncatedFile, label_path.string());

  std::map<int, std::size_t> bucket_of_value;
  for (std::size_t i = 0; i < count; ++i) bucket_of_value.emplace(labels[8 + i], 0);

  BucketedDataset ds;
  for (auto& [value, index] : bucket_of_value) {
    index = ds.bucket_ids.size();
    ds.bucket_ids.push_back(std::to_string(value));
    ds.class_names.push_back(std::to_string(value));
    ds.bucket_labels.push_back(static_cast<int>(index) + 1);
  }

  ds.features = Matrix(count, pixels);
  ds.shape = ImageShape{height, width, 1};
  for (std::size_t i = 0; i < count; ++i) {
    auto row = ds.features.row(i);
    const unsigned char* src = images.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) row[p] = src[p] / 255.0;
    ds.unit_ids.push_back("idx" + std::to_string(i));
    ds.bucket_of.push_back(bucket_of_value[labels[8 + i]]);
  }
  require_valid(ds);
  return ds;
}

void write_idx_images(const BucketedDataset& ds, const std::filesystem::path& image_path,
                      const std::filesystem::path& label_path) {
  if (!ds.shape || ds.shape->channels != 1) {
    throw Error(ErrorCode::InvalidSpec, "IDX export needs single-channel image data");
  }
  std::vector<unsigned char> label_byte(ds.num_buckets());
  for (std::size_t b = 0; b < ds.num_buckets(); ++b) {
    int v = -1;
    try {
      v = std::stoi(ds.bucket_ids[b]);
    } catch (const std::exception&) {
    }
    if (v < 0 || v > 255) {
      throw Error(ErrorCode::InvalidSpec, "bucket id not representable as IDX label: " + ds.bucket_ids[b]);
    }
    label_byte[b] = static_cast<unsigned char>(v);
  }

  std::ofstream img(image_path, std::ios::binary);
  std::ofstream lab(label_path, std::ios::binary);
  if (!img || !lab) throw Error(ErrorCode::IoError, "cannot write IDX output");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.num_units()));
  put_be32(img, static_cast<std::uint32_t>(ds.shape->height));
  put_be32(img, static_cast<std::uint32_t>(ds.shape->width));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.num_units()));
  for (std::size_t i = 0; i < ds.num_units(); ++i) {
    for (double v : ds.features.row(i)) {
      img.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    lab.put(static_cast<char>(label_byte[ds.bucket_of[i]]));
  }
}

}  // namespace bucketperm
