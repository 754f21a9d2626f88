#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "prunekit/gradient_vector.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

// Scalar-output computation graph over dense tensors with reverse-mode
// differentiation. Hessian-vector products are exact: the forward pass
// carries a tangent (directional derivative along v) and the backward pass
// carries the derivative of each adjoint along that same direction, so the
// adjoint-tangents collected at the parameter leaves equal H*v.
//
// Supported ops are exactly what the model zoo needs: dense matmul, 2-D
// same-padding convolution, per-channel scale, bias add, tanh, relu, global
// mean pooling, temperature softmax cross-entropy, plus elementwise
// add/mul/sum/const-scale for hand-built objectives.
class Graph {
 public:
  enum class Op {
    kParam,
    kConstant,
    kMatMul,
    kConv2d,
    kBiasAdd,
    kChannelScale,
    kTanh,
    kRelu,
    kMeanPool,
    kSoftmaxCrossEntropy,
    kAdd,
    kMul,
    kSum,
    kScaleConst,
  };

  int param(std::vector<int> shape) {
    Node n;
    n.op = Op::kParam;
    n.shape = std::move(shape);
    n.param_index = static_cast<int>(param_nodes_.size());
    int id = push(std::move(n));
    param_nodes_.push_back(id);
    return id;
  }

  int constant(Tensor t) {
    Node n;
    n.op = Op::kConstant;
    n.shape = t.shape;
    n.value = std::move(t);
    return push(std::move(n));
  }

  // [B,I] x [I,O] -> [B,O]
  int matmul(int x, int w) {
    const auto& xs = nodes_[check(x)].shape;
    const auto& ws = nodes_[check(w)].shape;
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[0])
      throw std::invalid_argument("matmul: need [B,I] x [I,O]");
    return push(make(Op::kMatMul, {xs[0], ws[1]}, x, w));
  }

  // [B,C,H,W] conv [F,C,kh,kw] -> [B,F,H,W]; same padding, stride 1, odd kernel
  int conv2d(int x, int k) {
    const auto& xs = nodes_[check(x)].shape;
    const auto& ks = nodes_[check(k)].shape;
    if (xs.size() != 4 || ks.size() != 4 || xs[1] != ks[1])
      throw std::invalid_argument("conv2d: need [B,C,H,W] x [F,C,kh,kw]");
    if (ks[2] % 2 == 0 || ks[3] % 2 == 0)
      throw std::invalid_argument("conv2d: kernel extents must be odd");
    return push(make(Op::kConv2d, {xs[0], ks[0], xs[2], xs[3]}, x, k));
  }

  // [B,O]+[O] or [B,C,H,W]+[C]
  int bias_add(int x, int b) { return push(make(Op::kBiasAdd, channel_arg_shape(x, b, "bias_add"), x, b)); }

  // per-channel multiply, same broadcasting as bias_add
  int channel_scale(int x, int s) {
    return push(make(Op::kChannelScale, channel_arg_shape(x, s, "channel_scale"), x, s));
  }

  int tanh(int x) { return push(make(Op::kTanh, nodes_[check(x)].shape, x)); }
  int relu(int x) { return push(make(Op::kRelu, nodes_[check(x)].shape, x)); }

  // [B,C,H,W] -> [B,C], mean over the spatial extent
  int mean_pool(int x) {
    const auto& xs = nodes_[check(x)].shape;
    if (xs.size() != 4) throw std::invalid_argument("mean_pool: need [B,C,H,W]");
    return push(make(Op::kMeanPool, {xs[0], xs[1]}, x));
  }

  // mean cross-entropy over the batch with logits divided by `temperature`
  // before the softmax
  int softmax_cross_entropy(int logits, std::vector<int> labels, double temperature) {
    const auto& zs = nodes_[check(logits)].shape;
    if (zs.size() != 2) throw std::invalid_argument("softmax_cross_entropy: need [B,C] logits");
    if (temperature <= 0.0) throw std::invalid_argument("softmax_cross_entropy: temperature must be positive");
    if (static_cast<int>(labels.size()) != zs[0])
      throw std::invalid_argument("softmax_cross_entropy: one label per row");
    for (int y : labels)
      if (y < 0 || y >= zs[1]) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    Node n = make(Op::kSoftmaxCrossEntropy, {}, logits);
    n.labels = std::move(labels);
    n.c = temperature;
    return push(std::move(n));
  }

  int add(int a, int b) {
    if (nodes_[check(a)].shape != nodes_[check(b)].shape)
      throw std::invalid_argument("add: shape mismatch");
    return push(make(Op::kAdd, nodes_[a].shape, a, b));
  }

  int mul(int a, int b) {
    if (nodes_[check(a)].shape != nodes_[check(b)].shape)
      throw std::invalid_argument("mul: shape mismatch");
    return push(make(Op::kMul, nodes_[a].shape, a, b));
  }

  int sum(int x) { return push(make(Op::kSum, {}, check(x))); }

  int scale_const(int x, double c) {
    Node n = make(Op::kScaleConst, nodes_[check(x)].shape, x);
    n.c = c;
    return push(std::move(n));
  }

  void set_output(int id) {
    if (!nodes_[check(id)].shape.empty())
      throw std::invalid_argument("output node must be a scalar");
    output_ = id;
  }

  int num_params() const { return static_cast<int>(param_nodes_.size()); }

  GradientVector param_template() const {
    GradientVector v;
    v.parts.reserve(param_nodes_.size());
    for (int id : param_nodes_) v.parts.emplace_back(nodes_[id].shape);
    return v;
  }

  const Tensor& node_value(int id) const { return nodes_[id].value; }

  // Scalar output of the most recent forward pass.
  double output_value() const {
    if (output_ < 0) throw std::logic_error("graph has no output");
    return nodes_[output_].value.data[0];
  }

  double evaluate(const GradientVector& params) {
    forward(params, nullptr);
    return nodes_[output_].value.data[0];
  }

  GradientVector gradient(const GradientVector& params) {
    forward(params, nullptr);
    backward(false);
    return collect(false);
  }

  // Exact H*v at `params`.
  GradientVector hvp(const GradientVector& params, const GradientVector& v) {
    if (!v.same_shape(param_template()))
      throw std::invalid_argument("hvp: direction shape mismatch");
    forward(params, &v);
    backward(true);
    return collect(true);
  }

 private:
  struct Node {
    Op op;
    std::vector<int> shape;
    std::array<int, 2> in{-1, -1};
    int param_index = -1;
    double c = 0.0;
    std::vector<int> labels;
    Tensor value, tangent, adjoint, adj_tangent;
    Tensor aux;  // softmax probabilities for the cross-entropy node
  };

  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
  int output_ = -1;

  int check(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("bad node id");
    return id;
  }

  static Node make(Op op, std::vector<int> shape, int a, int b = -1) {
    Node n;
    n.op = op;
    n.shape = std::move(shape);
    n.in = {a, b};
    return n;
  }

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  std::vector<int> channel_arg_shape(int x, int p, const char* what) const {
    const auto& xs = nodes_[check(x)].shape;
    const auto& ps = nodes_[check(p)].shape;
    int channels = xs.size() == 2 ? xs[1] : (xs.size() == 4 ? xs[1] : -1);
    if (channels < 0 || ps.size() != 1 || ps[0] != channels)
      throw std::invalid_argument(std::string(what) + ": per-channel arg must match " + shape_str(xs));
    return xs;
  }

  static int channel_of(const std::vector<int>& shape, std::size_t flat) {
    if (shape.size() == 2) return static_cast<int>(flat % shape[1]);
    std::size_t spatial = static_cast<std::size_t>(shape[2]) * shape[3];
    return static_cast<int>((flat / spatial) % shape[1]);
  }

  void bind_params(const GradientVector& params) {
    if (static_cast<int>(params.parts.size()) != num_params())
      throw std::invalid_argument("parameter count mismatch");
    for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
      Node& n = nodes_[param_nodes_[i]];
      if (params.parts[i].shape != n.shape)
        throw std::invalid_argument("parameter shape mismatch at leaf " + std::to_string(i));
      n.value = params.parts[i];
    }
  }

  GradientVector collect(bool tangent) const {
    GradientVector out;
    out.parts.reserve(param_nodes_.size());
    for (int id : param_nodes_)
      out.parts.push_back(tangent ? nodes_[id].adj_tangent : nodes_[id].adjoint);
    return out;
  }

  static void ensure(Tensor& t, const std::vector<int>& shape) {
    if (t.shape != shape) t = Tensor(shape);
    else t.fill(0.0);
  }

  // y += conv(x, k), same padding
  static void conv_acc(const Tensor& x, const Tensor& k, Tensor& y) {
    const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int F = k.shape[0], KH = k.shape[2], KW = k.shape[3];
    const int ph = (KH - 1) / 2, pw = (KW - 1) / 2;
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            double s = 0.0;
            for (int c = 0; c < C; ++c)
              for (int u = 0; u < KH; ++u) {
                int xi = i + u - ph;
                if (xi < 0 || xi >= H) continue;
                for (int v = 0; v < KW; ++v) {
                  int xj = j + v - pw;
                  if (xj < 0 || xj >= W) continue;
                  s += x.data[x.off4(b, c, xi, xj)] * k.data[k.off4(f, c, u, v)];
                }
              }
            y.data[y.off4(b, f, i, j)] += s;
          }
  }

  // gx += input-gradient of conv given gy and k; gk += kernel-gradient given x and gy.
  // Either destination may be null.
  static void conv_back(const Tensor& x, const Tensor& k, const Tensor& gy, Tensor* gx, Tensor* gk) {
    const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int F = k.shape[0], KH = k.shape[2], KW = k.shape[3];
    const int ph = (KH - 1) / 2, pw = (KW - 1) / 2;
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            double g = gy.data[gy.off4(b, f, i, j)];
            if (g == 0.0) continue;
            for (int c = 0; c < C; ++c)
              for (int u = 0; u < KH; ++u) {
                int xi = i + u - ph;
                if (xi < 0 || xi >= H) continue;
                for (int v = 0; v < KW; ++v) {
                  int xj = j + v - pw;
                  if (xj < 0 || xj >= W) continue;
                  if (gx) gx->data[gx->off4(b, c, xi, xj)] += g * k.data[k.off4(f, c, u, v)];
                  if (gk) gk->data[gk->off4(f, c, u, v)] += g * x.data[x.off4(b, c, xi, xj)];
                }
              }
          }
  }

  // y += a x b  ([B,I] x [I,O])
  static void matmul_acc(const Tensor& a, const Tensor& b, Tensor& y) {
    const int B = a.shape[0], I = a.shape[1], O = b.shape[1];
    for (int r = 0; r < B; ++r)
      for (int i = 0; i < I; ++i) {
        double av = a.data[static_cast<std::size_t>(r) * I + i];
        if (av == 0.0) continue;
        for (int o = 0; o < O; ++o)
          y.data[static_cast<std::size_t>(r) * O + o] += av * b.data[static_cast<std::size_t>(i) * O + o];
      }
  }

  // ga += gy b^T, gb += a^T gy; either may be null.
  static void matmul_back(const Tensor& a, const Tensor& b, const Tensor& gy, Tensor* ga, Tensor* gb) {
    const int B = a.shape[0], I = a.shape[1], O = b.shape[1];
    for (int r = 0; r < B; ++r)
      for (int o = 0; o < O; ++o) {
        double g = gy.data[static_cast<std::size_t>(r) * O + o];
        if (g == 0.0) continue;
        for (int i = 0; i < I; ++i) {
          if (ga) ga->data[static_cast<std::size_t>(r) * I + i] += g * b.data[static_cast<std::size_t>(i) * O + o];
          if (gb) gb->data[static_cast<std::size_t>(i) * O + o] += g * a.data[static_cast<std::size_t>(r) * I + i];
        }
      }
  }

  void forward(const GradientVector& params, const GradientVector* v) {
    if (output_ < 0) throw std::logic_error("graph has no output");
    bind_params(params);
    const bool tan = v != nullptr;
    for (auto& n : nodes_) {
      Node* a = n.in[0] >= 0 ? &nodes_[n.in[0]] : nullptr;
      Node* b = n.in[1] >= 0 ? &nodes_[n.in[1]] : nullptr;
      switch (n.op) {
        case Op::kParam:
          if (tan) n.tangent = v->parts[n.param_index];
          break;
        case Op::kConstant:
          if (tan) ensure(n.tangent, n.shape);
          break;
        case Op::kMatMul:
          ensure(n.value, n.shape);
          matmul_acc(a->value, b->value, n.value);
          if (tan) {
            ensure(n.tangent, n.shape);
            matmul_acc(a->tangent, b->value, n.tangent);
            matmul_acc(a->value, b->tangent, n.tangent);
          }
          break;
        case Op::kConv2d:
          ensure(n.value, n.shape);
          conv_acc(a->value, b->value, n.value);
          if (tan) {
            ensure(n.tangent, n.shape);
            conv_acc(a->tangent, b->value, n.tangent);
            conv_acc(a->value, b->tangent, n.tangent);
          }
          break;
        case Op::kBiasAdd:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = a->value.data[i] + b->value.data[channel_of(n.shape, i)];
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i)
              n.tangent.data[i] = a->tangent.data[i] + b->tangent.data[channel_of(n.shape, i)];
          }
          break;
        case Op::kChannelScale:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = a->value.data[i] * b->value.data[channel_of(n.shape, i)];
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i) {
              int c = channel_of(n.shape, i);
              n.tangent.data[i] = a->tangent.data[i] * b->value.data[c] + a->value.data[i] * b->tangent.data[c];
            }
          }
          break;
        case Op::kTanh:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = std::tanh(a->value.data[i]);
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i) {
              double y = n.value.data[i];
              n.tangent.data[i] = (1.0 - y * y) * a->tangent.data[i];
            }
          }
          break;
        case Op::kRelu:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = a->value.data[i] > 0.0 ? a->value.data[i] : 0.0;
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i)
              n.tangent.data[i] = a->value.data[i] > 0.0 ? a->tangent.data[i] : 0.0;
          }
          break;
        case Op::kMeanPool: {
          ensure(n.value, n.shape);
          const auto& xs = a->shape;
          const double inv = 1.0 / (static_cast<double>(xs[2]) * xs[3]);
          if (tan) ensure(n.tangent, n.shape);
          for (int bb = 0; bb < xs[0]; ++bb)
            for (int c = 0; c < xs[1]; ++c) {
              double s = 0.0, st = 0.0;
              for (int i = 0; i < xs[2]; ++i)
                for (int j = 0; j < xs[3]; ++j) {
                  std::size_t off = a->value.off4(bb, c, i, j);
                  s += a->value.data[off];
                  if (tan) st += a->tangent.data[off];
                }
              n.value.data[static_cast<std::size_t>(bb) * xs[1] + c] = s * inv;
              if (tan) n.tangent.data[static_cast<std::size_t>(bb) * xs[1] + c] = st * inv;
            }
          break;
        }
        case Op::kSoftmaxCrossEntropy: {
          ensure(n.value, n.shape);
          const int B = a->shape[0], C = a->shape[1];
          ensure(n.aux, a->shape);
          const double T = n.c;
          double loss = 0.0, loss_t = 0.0;
          for (int r = 0; r < B; ++r) {
            const double* z = &a->value.data[static_cast<std::size_t>(r) * C];
            double m = z[0];
            for (int cc = 1; cc < C; ++cc) m = std::max(m, z[cc]);
            double denom = 0.0;
            for (int cc = 0; cc < C; ++cc) denom += std::exp((z[cc] - m) / T);
            double lse = m / T + std::log(denom);
            loss += lse - z[n.labels[r]] / T;
            double* p = &n.aux.data[static_cast<std::size_t>(r) * C];
            for (int cc = 0; cc < C; ++cc) p[cc] = std::exp((z[cc] - m) / T) / denom;
            if (tan) {
              const double* zt = &a->tangent.data[static_cast<std::size_t>(r) * C];
              double s = 0.0;
              for (int cc = 0; cc < C; ++cc) s += p[cc] * zt[cc] / T;
              loss_t += s - zt[n.labels[r]] / T;
            }
          }
          n.value.data[0] = loss / B;
          if (tan) {
            ensure(n.tangent, n.shape);
            n.tangent.data[0] = loss_t / B;
          }
          break;
        }
        case Op::kAdd:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = a->value.data[i] + b->value.data[i];
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i)
              n.tangent.data[i] = a->tangent.data[i] + b->tangent.data[i];
          }
          break;
        case Op::kMul:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = a->value.data[i] * b->value.data[i];
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i)
              n.tangent.data[i] = a->tangent.data[i] * b->value.data[i] + a->value.data[i] * b->tangent.data[i];
          }
          break;
        case Op::kSum: {
          ensure(n.value, n.shape);
          double s = 0.0;
          for (double x : a->value.data) s += x;
          n.value.data[0] = s;
          if (tan) {
            ensure(n.tangent, n.shape);
            double st = 0.0;
            for (double x : a->tangent.data) st += x;
            n.tangent.data[0] = st;
          }
          break;
        }
        case Op::kScaleConst:
          ensure(n.value, n.shape);
          for (std::size_t i = 0; i < n.value.data.size(); ++i)
            n.value.data[i] = n.c * a->value.data[i];
          if (tan) {
            ensure(n.tangent, n.shape);
            for (std::size_t i = 0; i < n.tangent.data.size(); ++i)
              n.tangent.data[i] = n.c * a->tangent.data[i];
          }
          break;
      }
    }
  }

  // Reverse sweep. With `tan` set, adj_tangent buffers carry the directional
  // derivative of each adjoint along the forward tangent, which is what
  // turns one backward pass into an exact Hessian-vector product.
  void backward(bool tan) {
    for (auto& n : nodes_) {
      ensure(n.adjoint, n.shape);
      if (tan) ensure(n.adj_tangent, n.shape);
    }
    nodes_[output_].adjoint.data[0] = 1.0;

    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[id];
      Node* a = n.in[0] >= 0 ? &nodes_[n.in[0]] : nullptr;
      Node* b = n.in[1] >= 0 ? &nodes_[n.in[1]] : nullptr;
      switch (n.op) {
        case Op::kParam:
        case Op::kConstant:
          break;
        case Op::kMatMul:
          matmul_back(a->value, b->value, n.adjoint, &a->adjoint, &b->adjoint);
          if (tan) {
            matmul_back(a->value, b->value, n.adj_tangent, &a->adj_tangent, &b->adj_tangent);
            matmul_back(a->tangent, b->tangent, n.adjoint, &a->adj_tangent, &b->adj_tangent);
          }
          break;
        case Op::kConv2d:
          conv_back(a->value, b->value, n.adjoint, &a->adjoint, &b->adjoint);
          if (tan) {
            conv_back(a->value, b->value, n.adj_tangent, &a->adj_tangent, &b->adj_tangent);
            conv_back(a->tangent, b->tangent, n.adjoint, &a->adj_tangent, &b->adj_tangent);
          }
          break;
        case Op::kBiasAdd:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            int c = channel_of(n.shape, i);
            a->adjoint.data[i] += n.adjoint.data[i];
            b->adjoint.data[c] += n.adjoint.data[i];
            if (tan) {
              a->adj_tangent.data[i] += n.adj_tangent.data[i];
              b->adj_tangent.data[c] += n.adj_tangent.data[i];
            }
          }
          break;
        case Op::kChannelScale:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            int c = channel_of(n.shape, i);
            a->adjoint.data[i] += n.adjoint.data[i] * b->value.data[c];
            b->adjoint.data[c] += n.adjoint.data[i] * a->value.data[i];
            if (tan) {
              a->adj_tangent.data[i] += n.adj_tangent.data[i] * b->value.data[c] + n.adjoint.data[i] * b->tangent.data[c];
              b->adj_tangent.data[c] += n.adj_tangent.data[i] * a->value.data[i] + n.adjoint.data[i] * a->tangent.data[i];
            }
          }
          break;
        case Op::kTanh:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            double y = n.value.data[i];
            double d = 1.0 - y * y;
            a->adjoint.data[i] += d * n.adjoint.data[i];
            if (tan)
              a->adj_tangent.data[i] += d * n.adj_tangent.data[i] - 2.0 * y * n.tangent.data[i] * n.adjoint.data[i];
          }
          break;
        case Op::kRelu:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i)
            if (a->value.data[i] > 0.0) {
              a->adjoint.data[i] += n.adjoint.data[i];
              if (tan) a->adj_tangent.data[i] += n.adj_tangent.data[i];
            }
          break;
        case Op::kMeanPool: {
          const auto& xs = a->shape;
          const double inv = 1.0 / (static_cast<double>(xs[2]) * xs[3]);
          for (int bb = 0; bb < xs[0]; ++bb)
            for (int c = 0; c < xs[1]; ++c) {
              double g = n.adjoint.data[static_cast<std::size_t>(bb) * xs[1] + c] * inv;
              double gt = tan ? n.adj_tangent.data[static_cast<std::size_t>(bb) * xs[1] + c] * inv : 0.0;
              for (int i = 0; i < xs[2]; ++i)
                for (int j = 0; j < xs[3]; ++j) {
                  std::size_t off = a->value.off4(bb, c, i, j);
                  a->adjoint.data[off] += g;
                  if (tan) a->adj_tangent.data[off] += gt;
                }
            }
          break;
        }
        case Op::kSoftmaxCrossEntropy: {
          const int B = a->shape[0], C = a->shape[1];
          const double T = n.c;
          const double ga = n.adjoint.data[0];
          const double gt = tan ? n.adj_tangent.data[0] : 0.0;
          for (int r = 0; r < B; ++r) {
            const double* p = &n.aux.data[static_cast<std::size_t>(r) * C];
            double s = 0.0;
            if (tan) {
              const double* zt = &a->tangent.data[static_cast<std::size_t>(r) * C];
              for (int cc = 0; cc < C; ++cc) s += p[cc] * zt[cc] / T;
            }
            for (int cc = 0; cc < C; ++cc) {
              double grad = (p[cc] - (cc == n.labels[r] ? 1.0 : 0.0)) / (B * T);
              a->adjoint.data[static_cast<std::size_t>(r) * C + cc] += ga * grad;
              if (tan) {
                double pdot = p[cc] * (a->tangent.data[static_cast<std::size_t>(r) * C + cc] / T - s);
                a->adj_tangent.data[static_cast<std::size_t>(r) * C + cc] += gt * grad + ga * pdot / (B * T);
              }
            }
          }
          break;
        }
        case Op::kAdd:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            a->adjoint.data[i] += n.adjoint.data[i];
            b->adjoint.data[i] += n.adjoint.data[i];
            if (tan) {
              a->adj_tangent.data[i] += n.adj_tangent.data[i];
              b->adj_tangent.data[i] += n.adj_tangent.data[i];
            }
          }
          break;
        case Op::kMul:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            a->adjoint.data[i] += n.adjoint.data[i] * b->value.data[i];
            b->adjoint.data[i] += n.adjoint.data[i] * a->value.data[i];
            if (tan) {
              a->adj_tangent.data[i] += n.adj_tangent.data[i] * b->value.data[i] + n.adjoint.data[i] * b->tangent.data[i];
              b->adj_tangent.data[i] += n.adj_tangent.data[i] * a->value.data[i] + n.adjoint.data[i] * a->tangent.data[i];
            }
          }
          break;
        case Op::kSum:
          for (std::size_t i = 0; i < a->adjoint.data.size(); ++i) {
            a->adjoint.data[i] += n.adjoint.data[0];
            if (tan) a->adj_tangent.data[i] += n.adj_tangent.data[0];
          }
          break;
        case Op::kScaleConst:
          for (std::size_t i = 0; i < n.adjoint.data.size(); ++i) {
            a->adjoint.data[i] += n.c * n.adjoint.data[i];
            if (tan) a->adj_tangent.data[i] += n.c * n.adj_tangent.data[i];
          }
          break;
      }
    }
  }
};

// Free-function spellings used throughout the library.
inline double evaluate(Graph& g, const GradientVector& params) { return g.evaluate(params); }
inline GradientVector grad(Graph& g, const GradientVector& params) { return g.gradient(params); }
inline GradientVector hvp(Graph& g, const GradientVector& params, const GradientVector& v) {
  return g.hvp(params, v);
}

}  // namespace prunekit
