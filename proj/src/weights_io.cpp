#include "cslab/weights_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cslab {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'S', 'L', 'B'};
constexpr std::uint8_t kVersion = 1;

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "dense") return LayerKind::Dense;
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "relu") return LayerKind::Relu;
  if (s == "flatten") return LayerKind::Flatten;
  throw IoError("weight file names unknown layer kind '" + s + "'");
}

json arch_to_json(const Model& m) {
  json layers = json::array();
  for (const auto& d : m.layers) {
    json l;
    l["kind"] = kind_name(d.kind);
    if (d.kind == LayerKind::Dense) {
      l["in"] = d.in_features;
      l["out"] = d.out_features;
    } else if (d.kind == LayerKind::Conv2d) {
      l["in_ch"] = d.in_channels;
      l["out_ch"] = d.out_channels;
      l["ksize"] = d.ksize;
      l["stride"] = d.stride;
    }
    layers.push_back(l);
  }
  return json{{"input_shape", m.input_shape}, {"layers", layers}};
}

Model arch_from_json(const json& j) {
  std::vector<int> input_shape = j.at("input_shape").get<std::vector<int>>();
  std::vector<LayerDesc> descs;
  for (const auto& l : j.at("layers")) {
    const LayerKind kind = kind_from_name(l.at("kind").get<std::string>());
    switch (kind) {
      case LayerKind::Dense:
        descs.push_back(dense_layer(l.at("in").get<int>(), l.at("out").get<int>()));
        break;
      case LayerKind::Conv2d:
        descs.push_back(conv_layer(l.at("in_ch").get<int>(), l.at("out_ch").get<int>(),
                                   l.at("ksize").get<int>(), l.at("stride").get<int>()));
        break;
      case LayerKind::Relu:
        descs.push_back(relu_layer());
        break;
      case LayerKind::Flatten:
        descs.push_back(flatten_layer());
        break;
    }
  }
  return Model::build(std::move(input_shape), std::move(descs));
}

}  // namespace

void save_weights(const Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(kMagic, 4);
  f.put(static_cast<char>(kVersion));
  const std::string header = arch_to_json(model).dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
  std::uint8_t lenb[4] = {static_cast<std::uint8_t>(hlen), static_cast<std::uint8_t>(hlen >> 8),
                          static_cast<std::uint8_t>(hlen >> 16),
                          static_cast<std::uint8_t>(hlen >> 24)};
  f.write(reinterpret_cast<const char*>(lenb), 4);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& p : model.params) {
    f.write(reinterpret_cast<const char*>(p.w.data.data()),
            static_cast<std::streamsize>(p.w.data.size() * 4));
    f.write(reinterpret_cast<const char*>(p.b.data.data()),
            static_cast<std::streamsize>(p.b.data.size() * 4));
  }
  if (!f) throw IoError("write failed for " + path);
}

Model load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4)) throw IoError(path + ": truncated before magic bytes");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + ": magic mismatch, expected \"CSLB\", got \"" +
                  std::string(magic, 4) + "\"");
  const int version = f.get();
  if (version != kVersion)
    throw IoError(path + ": unsupported version " + std::to_string(version) +
                  ", expected " + std::to_string(kVersion));
  std::uint8_t lenb[4];
  if (!f.read(reinterpret_cast<char*>(lenb), 4))
    throw IoError(path + ": truncated header length");
  const std::uint32_t hlen = static_cast<std::uint32_t>(lenb[0]) |
                             (static_cast<std::uint32_t>(lenb[1]) << 8) |
                             (static_cast<std::uint32_t>(lenb[2]) << 16) |
                             (static_cast<std::uint32_t>(lenb[3]) << 24);
  std::string header(hlen, '\0');
  if (!f.read(header.data(), hlen)) throw IoError(path + ": truncated JSON header");
  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw IoError(path + ": bad JSON header: " + e.what());
  }
  Model model;
  try {
    model = arch_from_json(j);
  } catch (const json::exception& e) {
    throw IoError(path + ": bad architecture header: " + e.what());
  }
  for (auto& p : model.params) {
    f.read(reinterpret_cast<char*>(p.w.data.data()),
           static_cast<std::streamsize>(p.w.data.size() * 4));
    f.read(reinterpret_cast<char*>(p.b.data.data()),
           static_cast<std::streamsize>(p.b.data.size() * 4));
    if (!f)
      throw IoError(path + ": parameter payload shorter than the " +
                    std::to_string(model.param_count()) + " values the header declares");
  }
  f.peek();
  if (!f.eof())
    throw IoError(path + ": parameter payload longer than the header declares");
  return model;
}

}  // namespace cslab
