#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cslab/data.hpp"
#include "cslab/rng.hpp"

using namespace cslab;

namespace {

std::vector<std::uint8_t> idx_image_bytes(int n, int h, int w,
                                          const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> b = {0, 0, 8, 3};
  auto be32 = [&](std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
  };
  be32(static_cast<std::uint32_t>(n));
  be32(static_cast<std::uint32_t>(h));
  be32(static_cast<std::uint32_t>(w));
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

}  // namespace

TEST_CASE("idx images: known bytes scale to [0,1]") {
  const auto bytes = idx_image_bytes(1, 2, 2, {0, 255, 128, 64});
  const Tensor t = parse_idx_images(bytes);
  REQUIRE(t.shape == std::vector<int>{1, 1, 2, 2});
  CHECK(t.data[0] == 0.0f);
  CHECK(t.data[1] == 1.0f);
  CHECK(t.data[2] == doctest::Approx(128.0f / 255.0f));
  CHECK(t.data[3] == doctest::Approx(64.0f / 255.0f));
}

TEST_CASE("idx images: wrong magic names expected and actual") {
  auto bytes = idx_image_bytes(1, 1, 1, {7});
  bytes[3] = 1;  // label magic in an image file
  CHECK_THROWS_WITH_AS(parse_idx_images(bytes), doctest::Contains("0x00000803"), IoError);
  CHECK_THROWS_WITH_AS(parse_idx_images(bytes), doctest::Contains("0x00000801"), IoError);
}

TEST_CASE("idx images: truncated payload error carries the offset") {
  auto bytes = idx_image_bytes(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_WITH_AS(parse_idx_images(bytes),
                       doctest::Contains(std::to_string(bytes.size()).c_str()), IoError);
}

TEST_CASE("idx images: truncated header is rejected") {
  std::vector<std::uint8_t> bytes = {0, 0, 8};
  CHECK_THROWS_AS(parse_idx_images(bytes), IoError);
}

TEST_CASE("idx labels: parse and magic check") {
  std::vector<std::uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 3, 9, 0, 4};
  const auto labels = parse_idx_labels(bytes);
  CHECK(labels == std::vector<int>{9, 0, 4});
  bytes[3] = 3;
  CHECK_THROWS_WITH_AS(parse_idx_labels(bytes), doctest::Contains("0x00000801"), IoError);
}

TEST_CASE("idx: zero-count files parse to empty data") {
  const auto img = parse_idx_images(idx_image_bytes(0, 28, 28, {}));
  CHECK(img.shape[0] == 0);
  std::vector<std::uint8_t> lbl = {0, 0, 8, 1, 0, 0, 0, 0};
  CHECK(parse_idx_labels(lbl).empty());
}

TEST_CASE("idx round trip preserves every byte value") {
  std::vector<std::uint8_t> pixels(256);
  for (int i = 0; i < 256; ++i) pixels[i] = static_cast<std::uint8_t>(i);
  const auto bytes = idx_image_bytes(1, 16, 16, pixels);
  const Tensor t = parse_idx_images(bytes);
  CHECK(serialize_idx_images(t) == bytes);

  std::vector<int> labels = {0, 1, 127, 255};
  CHECK(parse_idx_labels(serialize_idx_labels(labels)) == labels);
}

TEST_CASE("idx file round trip through disk") {
  Dataset ds = synth_blobs(3, 10, 9, 6.0, 77);
  const std::string ip = "test_io_images.idx", lp = "test_io_labels.idx";
  write_file_bytes(ip, serialize_idx_images(ds.images));
  write_file_bytes(lp, serialize_idx_labels(ds.labels));
  Dataset back = load_idx_dataset(ip, lp, ds.num_classes, "back");
  CHECK(back.size() == ds.size());
  CHECK(back.labels == ds.labels);
  // quantization to bytes moves pixels by at most half a step
  for (std::size_t i = 0; i < ds.images.data.size(); ++i)
    CHECK(std::abs(back.images.data[i] - ds.images.data[i]) <= 0.5f / 255.0f + 1e-6f);
  std::remove(ip.c_str());
  std::remove(lp.c_str());
}

TEST_CASE("dataset: rejects out-of-range pixels and labels") {
  Tensor bad({1, 1, 1, 2}, {0.5f, 1.5f});
  CHECK_THROWS_AS(Dataset(bad, {0}, 2, "x"), InvalidInputError);
  Tensor ok({1, 1, 1, 2}, {0.5f, 0.5f});
  CHECK_THROWS_AS(Dataset(ok, {2}, 2, "x"), InvalidInputError);
  CHECK_THROWS_AS(Dataset(ok, {0, 1}, 2, "x"), InvalidInputError);  // label count
  Tensor flat({2}, {0.1f, 0.2f});
  CHECK_THROWS_AS(Dataset(flat, {0}, 2, "x"), InvalidInputError);  // not [N,C,H,W]
}

TEST_CASE("synth blobs: shapes, ranges and label balance") {
  Dataset ds = synth_blobs(4, 25, 16, 5.0, 3);
  CHECK(ds.images.shape == std::vector<int>{100, 1, 4, 4});
  CHECK(ds.size() == 100);
  std::vector<int> counts(4, 0);
  for (int l : ds.labels) ++counts[l];
  for (int c : counts) CHECK(c == 25);
  for (float v : ds.images.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  Dataset flat = synth_blobs(2, 5, 7, 5.0, 3);
  CHECK(flat.images.shape == std::vector<int>{10, 1, 1, 7});
}

TEST_CASE("synth blobs: classes are linearly separated by the class means") {
  Dataset ds = synth_blobs(3, 60, 16, 8.0, 11);
  const int dim = 16;
  std::vector<std::vector<double>> mean(3, std::vector<double>(dim, 0.0));
  std::vector<int> counts(3, 0);
  for (int i = 0; i < ds.size(); ++i) {
    const Tensor x = ds.sample(i);
    for (int j = 0; j < dim; ++j) mean[ds.labels[i]][j] += x.data[j];
    ++counts[ds.labels[i]];
  }
  for (int c = 0; c < 3; ++c)
    for (double& v : mean[c]) v /= counts[c];
  // nearest-mean classification should be near perfect at this separation
  int correct = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const Tensor x = ds.sample(i);
    int best = -1;
    double best_d = 1e300;
    for (int c = 0; c < 3; ++c) {
      double d = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double diff = x.data[j] - mean[c][j];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == ds.labels[i]) ++correct;
  }
  CHECK(correct >= static_cast<int>(0.98 * ds.size()));
}

TEST_CASE("synth blobs: deterministic per seed, distinct across seeds") {
  Dataset a = synth_blobs(3, 8, 9, 6.0, 21);
  Dataset b = synth_blobs(3, 8, 9, 6.0, 21);
  Dataset c = synth_blobs(3, 8, 9, 6.0, 22);
  CHECK(a.images.data == b.images.data);
  CHECK(a.labels == b.labels);
  CHECK(a.images.data != c.images.data);
}

TEST_CASE("synth blobs: invalid arguments raise") {
  CHECK_THROWS_AS(synth_blobs(0, 5, 4, 1.0, 1), InvalidInputError);
  CHECK_THROWS_AS(synth_blobs(2, -1, 4, 1.0, 1), InvalidInputError);
  CHECK_THROWS_AS(synth_blobs(2, 5, 0, 1.0, 1), InvalidInputError);
  CHECK_THROWS_AS(synth_blobs(2, 5, 4, 0.0, 1), InvalidInputError);
}

TEST_CASE("subsample: draws without replacement and keeps pairs aligned") {
  Dataset ds = synth_blobs(5, 10, 9, 6.0, 31);
  Dataset sub = subsample(ds, 20, 99);
  CHECK(sub.size() == 20);
  // every drawn sample appears in the source with the same label
  std::set<std::vector<float>> seen;
  for (int i = 0; i < sub.size(); ++i) {
    const Tensor s = sub.sample(i);
    CHECK(seen.insert(s.data).second);  // no duplicates
    bool found = false;
    for (int j = 0; j < ds.size() && !found; ++j)
      if (ds.sample(j).data == s.data && ds.labels[j] == sub.labels[i]) found = true;
    CHECK(found);
  }
}

TEST_CASE("subsample: full draw is a permutation; n=0 is empty") {
  Dataset ds = synth_blobs(2, 6, 5, 6.0, 41);
  Dataset all = subsample(ds, ds.size(), 1);
  std::vector<int> a = all.labels, b = ds.labels;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(subsample(ds, 0, 1).size() == 0);
  CHECK_THROWS_AS(subsample(ds, ds.size() + 1, 1), InvalidInputError);
}

TEST_CASE("subsample: deterministic per seed") {
  Dataset ds = synth_blobs(3, 20, 9, 6.0, 51);
  Dataset a = subsample(ds, 15, 7), b = subsample(ds, 15, 7), c = subsample(ds, 15, 8);
  CHECK(a.images.data == b.images.data);
  CHECK(a.labels == b.labels);
  CHECK(a.images.data != c.images.data);
}

TEST_CASE("split: disjoint, exhaustive, deterministic") {
  Dataset ds = synth_blobs(4, 25, 9, 6.0, 61);
  auto [tr, te] = split_dataset(ds, 0.8, 5);
  CHECK(tr.size() == 80);
  CHECK(te.size() == 20);
  std::set<std::vector<float>> train_rows;
  for (int i = 0; i < tr.size(); ++i) train_rows.insert(tr.sample(i).data);
  for (int i = 0; i < te.size(); ++i)
    CHECK(train_rows.count(te.sample(i).data) == 0);
  auto [tr2, te2] = split_dataset(ds, 0.8, 5);
  CHECK(tr2.images.data == tr.images.data);
  CHECK(te2.labels == te.labels);
  CHECK_THROWS_AS(split_dataset(ds, 1.5, 5), InvalidInputError);
}
