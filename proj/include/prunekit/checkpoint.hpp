#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prunekit/model.hpp"

namespace prunekit {

// Checkpoint layout: one line of JSON (layer names, shapes, payload offsets),
// then raw little-endian 64-bit floats — current parameters first, the
// initialization snapshot after them. Round-trips byte-exactly.

namespace detail {

inline void write_f64_le(std::ostream& out, const std::vector<double>& xs) {
  for (double x : xs) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
}

inline std::vector<double> read_f64_le(std::istream& in, std::size_t n) {
  std::vector<double> xs(n);
  for (std::size_t k = 0; k < n; ++k) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
      throw std::runtime_error("checkpoint payload truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&xs[k], &bits, sizeof(double));
  }
  return xs;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Network& net) {
  nlohmann::json header;
  header["format"] = "prunekit-checkpoint-v1";
  header["activation"] = to_string(net.activation);
  header["classes"] = net.classes;
  header["input_shape"] = net.input_shape;
  header["layers"] = nlohmann::json::array();
  for (const Layer& layer : net.layers)
    header["layers"].push_back({{"name", layer.name},
                                {"kind", to_string(layer.kind)},
                                {"filters", layer.filters}});
  header["parts"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Tensor& t : net.params.parts) {
    header["parts"].push_back({{"shape", t.shape}, {"offset", offset}});
    offset += t.numel();
  }
  header["init_offset"] = offset;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  detail::write_f64_le(out, net.params.flatten());
  detail::write_f64_le(out, net.init_snapshot.flatten());
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint header missing: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "prunekit-checkpoint-v1")
    throw std::runtime_error("unrecognized checkpoint format in " + path);

  Network net;
  net.activation = activation_from_string(header.at("activation").get<std::string>());
  net.classes = header.at("classes").get<int>();
  net.input_shape = header.at("input_shape").get<std::vector<int>>();

  std::vector<std::vector<int>> shapes;
  std::size_t total = 0;
  for (const auto& part : header.at("parts")) {
    shapes.push_back(part.at("shape").get<std::vector<int>>());
    total += Tensor::numel_of(shapes.back());
  }
  if (header.at("init_offset").get<std::size_t>() != total)
    throw std::runtime_error("checkpoint part table inconsistent in " + path);

  const auto& layers = header.at("layers");
  if (shapes.size() != 3 * layers.size())
    throw std::runtime_error("checkpoint expects three parts per layer in " + path);
  int part = 0;
  for (const auto& jl : layers) {
    Layer layer;
    layer.name = jl.at("name").get<std::string>();
    layer.kind = jl.at("kind").get<std::string>() == "conv" ? LayerKind::kConv : LayerKind::kDense;
    layer.filters = jl.at("filters").get<int>();
    layer.weight_part = part++;
    layer.scale_part = part++;
    layer.bias_part = part++;
    net.layers.push_back(std::move(layer));
  }

  for (const auto& shape : shapes) net.params.parts.emplace_back(shape);
  net.init_snapshot = net.params;
  std::vector<double> current = detail::read_f64_le(in, total);
  std::vector<double> init = detail::read_f64_le(in, total);
  net.params.unflatten(current);
  net.init_snapshot.unflatten(init);
  return net;
}

}  // namespace prunekit
