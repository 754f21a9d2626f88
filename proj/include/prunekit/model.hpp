#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/autodiff.hpp"
#include "prunekit/gradient_vector.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

enum class LayerKind { kDense, kConv };
enum class Activation { kTanh, kRelu };
enum class Granularity { kStructured, kUnstructured };

inline const char* to_string(LayerKind k) { return k == LayerKind::kDense ? "dense" : "conv"; }
inline const char* to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }
inline const char* to_string(Granularity g) {
  return g == Granularity::kStructured ? "structured" : "unstructured";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + s);
}

inline Granularity granularity_from_string(const std::string& s) {
  if (s == "structured") return Granularity::kStructured;
  if (s == "unstructured") return Granularity::kUnstructured;
  throw std::invalid_argument("unknown granularity: " + s);
}

// One layer: linear map, then per-filter scale, then bias, then activation
// (the final layer emits raw logits). Parameter tensors live in
// Network::params; a layer stores part indices in registration order
// (weight, scale, bias).
struct Layer {
  std::string name;
  LayerKind kind;
  int filters;  // output units / output channels
  int weight_part, scale_part, bias_part;
};

// A stand-in for the small CNN/MLP families: explicit filter grouping and a
// per-filter multiplicative scale in every layer (so scale-magnitude
// importance is expressible without full batch normalization).
struct Network {
  std::vector<Layer> layers;
  std::vector<int> input_shape;  // per-sample: {d} dense, {C,H,W} conv
  int classes = 0;
  Activation activation = Activation::kTanh;
  GradientVector params;         // (weight, scale, bias) per layer, layer order
  GradientVector init_snapshot;  // copy of params at construction time

  std::size_t num_parameters() const { return params.numel(); }
};

namespace detail {

inline int append_layer(Network& net, const std::string& name, LayerKind kind, int filters,
                        Tensor weight, Rng& rng, double init_std) {
  for (auto& w : weight.data) w = init_std * rng.normal();
  Layer layer;
  layer.name = name;
  layer.kind = kind;
  layer.filters = filters;
  layer.weight_part = static_cast<int>(net.params.parts.size());
  net.params.parts.push_back(std::move(weight));
  layer.scale_part = static_cast<int>(net.params.parts.size());
  Tensor scale({filters});
  scale.fill(1.0);
  net.params.parts.push_back(std::move(scale));
  layer.bias_part = static_cast<int>(net.params.parts.size());
  net.params.parts.push_back(Tensor({filters}));
  net.layers.push_back(layer);
  return static_cast<int>(net.layers.size() - 1);
}

inline double init_std(Activation act, int fan_in) {
  const double gain = act == Activation::kRelu ? 2.0 : 1.0;
  return std::sqrt(gain / fan_in);
}

}  // namespace detail

// widths = (input, hidden..., classes); zero-centered fan-in-scaled init,
// scales start at 1, biases at 0.
inline Network build_mlp(const std::vector<int>& widths, Activation act, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("build_mlp: need input and output widths");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("build_mlp: widths must be positive");
  Network net;
  net.input_shape = {widths.front()};
  net.classes = widths.back();
  net.activation = act;
  Rng rng(mix_seed(seed, 0));
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i], out = widths[i + 1];
    const bool head = i + 2 == widths.size();
    detail::append_layer(net, head ? "head" : "dense" + std::to_string(i + 1), LayerKind::kDense,
                         out, Tensor({in, out}), rng, detail::init_std(act, in));
  }
  net.init_snapshot = net.params;
  return net;
}

// Conv stack (same padding, stride 1) -> global mean pool -> dense head.
inline Network build_cnn(int in_channels, int in_h, int in_w, const std::vector<int>& channels,
                         int kernel, int classes, Activation act, std::uint64_t seed) {
  if (channels.empty()) throw std::invalid_argument("build_cnn: need at least one conv layer");
  if (in_channels <= 0 || in_h <= 0 || in_w <= 0)
    throw std::invalid_argument("build_cnn: input extents must be positive");
  if (kernel <= 0 || kernel % 2 == 0)
    throw std::invalid_argument("build_cnn: kernel must be odd and positive");
  if (classes < 2) throw std::invalid_argument("build_cnn: need at least two classes");
  for (int c : channels)
    if (c <= 0) throw std::invalid_argument("build_cnn: channel counts must be positive");
  Network net;
  net.input_shape = {in_channels, in_h, in_w};
  net.classes = classes;
  net.activation = act;
  Rng rng(mix_seed(seed, 0));
  int prev = in_channels;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const int out = channels[i];
    detail::append_layer(net, "conv" + std::to_string(i + 1), LayerKind::kConv, out,
                         Tensor({out, prev, kernel, kernel}), rng,
                         detail::init_std(act, prev * kernel * kernel));
    prev = out;
  }
  detail::append_layer(net, "head", LayerKind::kDense, classes, Tensor({prev, classes}), rng,
                       detail::init_std(act, prev));
  net.init_snapshot = net.params;
  return net;
}

// A group of parameters pruned as one unit: (part, flat offset) pairs into
// Network::params. Structured groups bundle a filter's outgoing weights with
// its bias and scale; unstructured groups are single scalars.
struct PruneGroup {
  int layer = 0;
  int group = 0;
  std::vector<std::pair<int, std::size_t>> indices;
};

inline std::vector<PruneGroup> prune_groups(const Network& net, Granularity granularity) {
  std::vector<PruneGroup> out;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& layer = net.layers[li];
    const Tensor& w = net.params.parts[layer.weight_part];
    if (granularity == Granularity::kStructured) {
      for (int f = 0; f < layer.filters; ++f) {
        PruneGroup g;
        g.layer = static_cast<int>(li);
        g.group = f;
        if (layer.kind == LayerKind::kDense) {
          const int out_w = w.shape[1];
          for (int i = 0; i < w.shape[0]; ++i)
            g.indices.emplace_back(layer.weight_part, static_cast<std::size_t>(i) * out_w + f);
        } else {
          const std::size_t per_filter = w.numel() / w.shape[0];
          for (std::size_t k = 0; k < per_filter; ++k)
            g.indices.emplace_back(layer.weight_part, f * per_filter + k);
        }
        g.indices.emplace_back(layer.scale_part, static_cast<std::size_t>(f));
        g.indices.emplace_back(layer.bias_part, static_cast<std::size_t>(f));
        out.push_back(std::move(g));
      }
    } else {
      int gid = 0;
      for (int part : {layer.weight_part, layer.scale_part, layer.bias_part})
        for (std::size_t k = 0; k < net.params.parts[part].numel(); ++k) {
          PruneGroup g;
          g.layer = static_cast<int>(li);
          g.group = gid++;
          g.indices.emplace_back(part, k);
          out.push_back(std::move(g));
        }
    }
  }
  return out;
}

// Sum over the group of squared drift from the stored initialization.
inline double distance_from_init(const Network& net, const PruneGroup& group) {
  if (!net.init_snapshot.same_shape(net.params))
    throw std::invalid_argument("distance_from_init: snapshot missing or mismatched");
  double s = 0.0;
  for (auto [part, off] : group.indices) {
    if (part < 0 || part >= static_cast<int>(net.params.parts.size()) ||
        off >= net.params.parts[part].numel())
      throw std::invalid_argument("distance_from_init: group indexes outside the network");
    double d = net.params.parts[part].data[off] - net.init_snapshot.parts[part].data[off];
    s += d * d;
  }
  return s;
}

// Graph of the mean tempered cross-entropy over one input batch. The graph's
// parameter leaves are registered in Network::params order, so
// graph.evaluate(net.params) / gradient / hvp line up part-for-part.
struct LossGraph {
  Graph graph;
  int logits = -1;
};

inline LossGraph build_loss_graph(const Network& net, const Tensor& inputs,
                                  const std::vector<int>& labels, double temperature) {
  std::vector<int> expect = {static_cast<int>(labels.size())};
  expect.insert(expect.end(), net.input_shape.begin(), net.input_shape.end());
  if (inputs.shape != expect)
    throw std::invalid_argument("build_loss_graph: inputs must be " + shape_str(expect) +
                                ", got " + shape_str(inputs.shape));
  LossGraph lg;
  Graph& g = lg.graph;
  int h = g.constant(inputs);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& layer = net.layers[li];
    int w = g.param(net.params.parts[layer.weight_part].shape);
    int s = g.param(net.params.parts[layer.scale_part].shape);
    int b = g.param(net.params.parts[layer.bias_part].shape);
    if (layer.kind == LayerKind::kConv) {
      h = g.conv2d(h, w);
    } else {
      if (li > 0 && net.layers[li - 1].kind == LayerKind::kConv) h = g.mean_pool(h);
      h = g.matmul(h, w);
    }
    h = g.bias_add(g.channel_scale(h, s), b);
    if (li + 1 < net.layers.size())
      h = net.activation == Activation::kTanh ? g.tanh(h) : g.relu(h);
  }
  lg.logits = h;
  g.set_output(g.softmax_cross_entropy(h, labels, temperature));
  return lg;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline EvalResult evaluate_network(const Network& net, const Tensor& inputs,
                                   const std::vector<int>& labels, double temperature) {
  LossGraph lg = build_loss_graph(net, inputs, labels, temperature);
  EvalResult r;
  r.loss = lg.graph.evaluate(net.params);
  const Tensor& logits = lg.graph.node_value(lg.logits);
  const int c = logits.shape[1];
  int hits = 0;
  for (std::size_t row = 0; row < labels.size(); ++row) {
    int best = 0;
    for (int k = 1; k < c; ++k)
      if (logits.data[row * c + k] > logits.data[row * c + best]) best = k;
    hits += best == labels[row] ? 1 : 0;
  }
  r.accuracy = labels.empty() ? 0.0 : static_cast<double>(hits) / labels.size();
  return r;
}

}  // namespace prunekit
