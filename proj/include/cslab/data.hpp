#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cslab/tensor.hpp"

namespace cslab {

/// Labeled image set. Images are [N,C,H,W] with pixels in [0,1];
/// construction enforces both the pixel range and the label range.
struct Dataset {
  Tensor images;  // [N,C,H,W]
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  Dataset() = default;
  Dataset(Tensor images_, std::vector<int> labels_, int num_classes_, std::string name_);

  int size() const { return images.shape.empty() ? 0 : images.shape[0]; }
  std::vector<int> sample_shape() const;  // [C,H,W]
  Tensor sample(int i) const;
};

// ---- IDX binary format (big-endian sizes) ----

/// Parses an IDX unsigned-byte 3-d image file (magic 0x00000803) into a
/// [N,1,H,W] tensor scaled by 1/255. Errors carry the offending byte offset.
Tensor parse_idx_images(const std::vector<std::uint8_t>& bytes);

/// Parses an IDX unsigned-byte 1-d label file (magic 0x00000801).
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

/// Inverse of parse_idx_images; pixels are rounded back to bytes.
std::vector<std::uint8_t> serialize_idx_images(const Tensor& images);
std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// Loads an image/label IDX pair into a Dataset.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         int num_classes, const std::string& name);

// ---- synthetic data ----

/// Isotropic Gaussian clusters (sigma=1) around mutually distant centers
/// (pairwise distance >= separation), affinely rescaled into [0,1] and
/// clipped. When dim is a perfect square the images come out [N,1,s,s],
/// otherwise [N,1,1,dim]. Deterministic per seed.
Dataset synth_blobs(int num_classes, int per_class, int dim, double separation,
                    std::uint64_t seed);

/// n items drawn without replacement, deterministic per seed.
Dataset subsample(const Dataset& ds, int n, std::uint64_t seed);

/// Disjoint (train, test) split after a seeded shuffle; train gets
/// round(fraction * N) items.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction,
                                          std::uint64_t seed);

}  // namespace cslab
