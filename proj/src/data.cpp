#include "cslab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cslab/rng.hpp"

namespace cslab {

Dataset::Dataset(Tensor images_, std::vector<int> labels_, int num_classes_,
                 std::string name_)
    : images(std::move(images_)),
      labels(std::move(labels_)),
      num_classes(num_classes_),
      name(std::move(name_)) {
  if (images.shape.size() != 4)
    throw InvalidInputError("dataset images must be [N,C,H,W], got " + images.shape_str());
  if (static_cast<int>(labels.size()) != images.shape[0])
    throw InvalidInputError("dataset has " + std::to_string(images.shape[0]) +
                            " images but " + std::to_string(labels.size()) + " labels");
  if (num_classes < 1) throw InvalidInputError("dataset needs at least one class");
  for (float v : images.data)
    if (!(v >= 0.0f && v <= 1.0f))
      throw InvalidInputError("dataset pixel " + std::to_string(v) + " outside [0,1]");
  for (int l : labels)
    if (l < 0 || l >= num_classes)
      throw InvalidInputError("dataset label " + std::to_string(l) + " outside [0," +
                              std::to_string(num_classes) + ")");
}

std::vector<int> Dataset::sample_shape() const {
  return {images.shape[1], images.shape[2], images.shape[3]};
}

Tensor Dataset::sample(int i) const {
  if (i < 0 || i >= size()) throw InvalidInputError("dataset index out of range");
  const long per = images.numel() / std::max(1, size());
  Tensor t(sample_shape());
  std::copy(images.data.begin() + static_cast<long>(i) * per,
            images.data.begin() + static_cast<long>(i + 1) * per, t.data.begin());
  return t;
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size())
    throw IoError("IDX file truncated at byte offset " + std::to_string(off));
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

void write_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

Tensor parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic)
    throw IoError("IDX image magic mismatch at offset 0: expected 0x00000803, got 0x" +
                  [&] { char buf[16]; snprintf(buf, sizeof buf, "%08x", magic); return std::string(buf); }());
  const std::uint32_t n = read_be32(bytes, 4);
  const std::uint32_t h = read_be32(bytes, 8);
  const std::uint32_t w = read_be32(bytes, 12);
  const std::size_t need = 16 + static_cast<std::size_t>(n) * h * w;
  if (bytes.size() < need)
    throw IoError("IDX image payload truncated: need " + std::to_string(need) +
                  " bytes, have " + std::to_string(bytes.size()) +
                  " (missing from offset " + std::to_string(bytes.size()) + ")");
  Tensor t({static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)});
  for (std::size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = static_cast<float>(bytes[16 + i]) / 255.0f;
  return t;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kLabelMagic)
    throw IoError("IDX label magic mismatch at offset 0: expected 0x00000801, got 0x" +
                  [&] { char buf[16]; snprintf(buf, sizeof buf, "%08x", magic); return std::string(buf); }());
  const std::uint32_t n = read_be32(bytes, 4);
  const std::size_t need = 8 + static_cast<std::size_t>(n);
  if (bytes.size() < need)
    throw IoError("IDX label payload truncated: need " + std::to_string(need) +
                  " bytes, have " + std::to_string(bytes.size()) +
                  " (missing from offset " + std::to_string(bytes.size()) + ")");
  std::vector<int> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = bytes[8 + i];
  return labels;
}

std::vector<std::uint8_t> serialize_idx_images(const Tensor& images) {
  if (images.shape.size() != 4 || images.shape[1] != 1)
    throw InvalidInputError("serialize_idx_images expects [N,1,H,W]");
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.data.size());
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.shape[0]));
  write_be32(out, static_cast<std::uint32_t>(images.shape[2]));
  write_be32(out, static_cast<std::uint32_t>(images.shape[3]));
  for (float v : images.data) {
    const int b = static_cast<int>(std::lround(v * 255.0f));
    out.push_back(static_cast<std::uint8_t>(std::clamp(b, 0, 255)));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw InvalidInputError("label does not fit in a byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path);
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         int num_classes, const std::string& name) {
  Tensor images = parse_idx_images(read_file_bytes(images_path));
  std::vector<int> labels = parse_idx_labels(read_file_bytes(labels_path));
  return Dataset(std::move(images), std::move(labels), num_classes, name);
}

Dataset synth_blobs(int num_classes, int per_class, int dim, double separation,
                    std::uint64_t seed) {
  if (num_classes < 1) throw InvalidInputError("synth_blobs: need at least one class");
  if (per_class < 0) throw InvalidInputError("synth_blobs: negative per_class");
  if (dim < 1) throw InvalidInputError("synth_blobs: dim must be positive");
  if (separation <= 0.0) throw InvalidInputError("synth_blobs: separation must be > 0");

  auto rng = make_rng(seed, 0x626c6f6273ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Centers uniform in the unit cube, then scaled up until the minimum
  // pairwise distance meets the separation requirement.
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim));
  for (auto& c : centers)
    for (double& v : c) v = unit(rng);
  if (num_classes > 1) {
    double min_dist = 1e300;
    for (int a = 0; a < num_classes; ++a)
      for (int b = a + 1; b < num_classes; ++b) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) {
          const double d = centers[a][j] - centers[b][j];
          s += d * d;
        }
        min_dist = std::min(min_dist, std::sqrt(s));
      }
    if (min_dist < separation) {
      const double scale = separation / std::max(min_dist, 1e-12);
      for (auto& c : centers)
        for (double& v : c) v *= scale;
    }
  }

  const int n = num_classes * per_class;
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(n) * dim);
  std::vector<int> labels(n);
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < per_class; ++s) {
      const int idx = c * per_class + s;
      labels[idx] = c;
      double* row = raw.data() + static_cast<std::size_t>(idx) * dim;
      for (int j = 0; j < dim; ++j) row[j] = centers[c][j] + noise(rng);
    }
  }

  // Affine rescale of the whole cloud into [0,1]; the clip only trims
  // rounding at the extremes.
  double lo = 0.0, hi = 1.0;
  if (n > 0) {
    lo = *std::min_element(raw.begin(), raw.end());
    hi = *std::max_element(raw.begin(), raw.end());
    if (hi <= lo) hi = lo + 1.0;
  }
  const double inv = 1.0 / (hi - lo);

  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  const bool square = side * side == dim;
  Tensor images(square ? std::vector<int>{n, 1, side, side}
                       : std::vector<int>{n, 1, 1, dim});
  for (std::size_t i = 0; i < raw.size(); ++i)
    images.data[i] =
        std::clamp(static_cast<float>((raw[i] - lo) * inv), 0.0f, 1.0f);
  return Dataset(std::move(images), std::move(labels), num_classes, "synth-blobs");
}

Dataset subsample(const Dataset& ds, int n, std::uint64_t seed) {
  if (n < 0 || n > ds.size())
    throw InvalidInputError("subsample: n=" + std::to_string(n) + " out of range for " +
                            std::to_string(ds.size()) + " samples");
  std::vector<int> idx(ds.size());
  for (int i = 0; i < ds.size(); ++i) idx[i] = i;
  auto rng = make_rng(seed, 0x73756273ull);
  // Fisher-Yates prefix
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, ds.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  const auto shape = ds.sample_shape();
  Tensor images({n, shape[0], shape[1], shape[2]});
  std::vector<int> labels(n);
  const long per = Tensor::numel_of(shape);
  for (int i = 0; i < n; ++i) {
    std::copy(ds.images.data.begin() + static_cast<long>(idx[i]) * per,
              ds.images.data.begin() + static_cast<long>(idx[i] + 1) * per,
              images.data.begin() + static_cast<long>(i) * per);
    labels[i] = ds.labels[idx[i]];
  }
  return Dataset(std::move(images), std::move(labels), ds.num_classes, ds.name);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction,
                                          std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw InvalidInputError("split_dataset: fraction outside [0,1]");
  std::vector<int> idx(ds.size());
  for (int i = 0; i < ds.size(); ++i) idx[i] = i;
  auto rng = make_rng(seed, 0x73706c6974ull);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_train = static_cast<int>(std::lround(fraction * ds.size()));

  auto take = [&](int lo, int hi) {
    const auto shape = ds.sample_shape();
    const int n = hi - lo;
    Tensor images({n, shape[0], shape[1], shape[2]});
    std::vector<int> labels(n);
    const long per = Tensor::numel_of(shape);
    for (int i = 0; i < n; ++i) {
      std::copy(ds.images.data.begin() + static_cast<long>(idx[lo + i]) * per,
                ds.images.data.begin() + static_cast<long>(idx[lo + i] + 1) * per,
                images.data.begin() + static_cast<long>(i) * per);
      labels[i] = ds.labels[idx[lo + i]];
    }
    return Dataset(std::move(images), std::move(labels), ds.num_classes, ds.name);
  };
  return {take(0, n_train), take(n_train, ds.size())};
}

}  // namespace cslab
