#include <gtest/gtest.h>

#include <stdexcept>

#include "prunekit/autodiff.hpp"
#include "test_support.hpp"

using namespace prunekit;
using namespace prunekit::testing;

namespace {

// loss = 0.5 * theta^T A theta with theta a [1,4] row vector
Graph quadratic_graph(const Tensor& a_matrix, int& theta_id) {
  Graph g;
  theta_id = g.param({1, 4});
  int a = g.constant(a_matrix);
  int y = g.matmul(theta_id, a);
  int m = g.mul(y, theta_id);
  int s = g.sum(m);
  g.set_output(g.scale_const(s, 0.5));
  return g;
}

const Tensor kA({4, 4}, {2, 1, 0, 0,  //
                         1, 3, 1, 0,  //
                         0, 1, 4, 1,  //
                         0, 0, 1, 5});

// tanh MLP with per-channel scales, ending in tempered cross-entropy
Graph mlp_graph(Rng& rng) {
  Graph g;
  Tensor x({3, 4});
  for (auto& v : x.data) v = rng.normal();
  int xin = g.constant(x);
  int w1 = g.param({4, 5});
  int s1 = g.param({5});
  int b1 = g.param({5});
  int h = g.tanh(g.bias_add(g.channel_scale(g.matmul(xin, w1), s1), b1));
  int w2 = g.param({5, 3});
  int b2 = g.param({3});
  int logits = g.bias_add(g.matmul(h, w2), b2);
  g.set_output(g.softmax_cross_entropy(logits, {0, 2, 1}, 2.0));
  return g;
}

// conv -> scale -> bias -> relu -> mean pool -> dense -> cross-entropy
Graph cnn_graph(Rng& rng) {
  Graph g;
  Tensor x({2, 2, 5, 5});
  for (auto& v : x.data) v = rng.normal();
  int xin = g.constant(x);
  int k1 = g.param({3, 2, 3, 3});
  int s1 = g.param({3});
  int b1 = g.param({3});
  int h = g.relu(g.bias_add(g.channel_scale(g.conv2d(xin, k1), s1), b1));
  int pooled = g.mean_pool(h);
  int w = g.param({3, 4});
  int b = g.param({4});
  int logits = g.bias_add(g.matmul(pooled, w), b);
  g.set_output(g.softmax_cross_entropy(logits, {1, 3}, 1.5));
  return g;
}

GradientVector random_params(Graph& g, std::uint64_t seed, double scale = 0.7) {
  GradientVector p = g.param_template();
  Rng rng(seed);
  fill_normal(p, rng, scale);
  return p;
}

}  // namespace

TEST(Autodiff, QuadraticClosedForm) {
  int theta_id;
  Graph g = quadratic_graph(kA, theta_id);
  GradientVector theta;
  theta.parts.push_back(Tensor({1, 4}, {1.0, -1.0, 2.0, 0.5}));

  EXPECT_DOUBLE_EQ(g.evaluate(theta), 9.125);

  GradientVector gr = g.gradient(theta);
  const double expected_grad[] = {1.0, 0.0, 7.5, 4.5};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(gr.parts[0].data[i], expected_grad[i], 1e-12);

  GradientVector v;
  v.parts.push_back(Tensor({1, 4}, {1.0, 1.0, 1.0, 1.0}));
  GradientVector hv = g.hvp(theta, v);
  const double expected_hv[] = {3.0, 5.0, 6.0, 6.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(hv.parts[0].data[i], expected_hv[i], 1e-12);
}

TEST(Autodiff, CrossEntropyHandValue) {
  // B=1, C=2, logits (2,0), label 0, temperature 2:
  // loss = log(1 + exp(-1)) since u = (1, 0)
  Graph g;
  int z = g.param({1, 2});
  g.set_output(g.softmax_cross_entropy(z, {0}, 2.0));
  GradientVector p;
  p.parts.push_back(Tensor({1, 2}, {2.0, 0.0}));
  EXPECT_NEAR(g.evaluate(p), std::log(1.0 + std::exp(-1.0)), 1e-15);

  // gradient = (p - onehot) / T with p = softmax(1, 0)
  GradientVector gr = g.gradient(p);
  double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(gr.parts[0].data[0], (p0 - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(gr.parts[0].data[1], (1.0 - p0) / 2.0, 1e-15);
}

TEST(Autodiff, MlpGradientMatchesFiniteDifference) {
  Rng rng(101);
  Graph g = mlp_graph(rng);
  GradientVector p = random_params(g, 202);
  GradientVector analytic = g.gradient(p);
  GradientVector numeric = fd_gradient(g, p);
  EXPECT_LT(max_rel_err(analytic, numeric), 2e-8);
}

TEST(Autodiff, MlpHvpMatchesFiniteDifference) {
  Rng rng(303);
  Graph g = mlp_graph(rng);
  GradientVector p = random_params(g, 404);
  GradientVector v = random_params(g, 505, 1.0);
  GradientVector analytic = g.hvp(p, v);
  GradientVector numeric = fd_hvp(g, p, v);
  EXPECT_LT(max_rel_err(analytic, numeric), 1e-7);
}

TEST(Autodiff, CnnGradientMatchesFiniteDifference) {
  Rng rng(606);
  Graph g = cnn_graph(rng);
  GradientVector p = random_params(g, 707);
  GradientVector analytic = g.gradient(p);
  GradientVector numeric = fd_gradient(g, p);
  EXPECT_LT(max_rel_err(analytic, numeric), 2e-8);
}

TEST(Autodiff, CnnHvpMatchesFiniteDifference) {
  Rng rng(808);
  Graph g = cnn_graph(rng);
  GradientVector p = random_params(g, 909);
  GradientVector v = random_params(g, 1010, 1.0);
  GradientVector analytic = g.hvp(p, v);
  GradientVector numeric = fd_hvp(g, p, v);
  EXPECT_LT(max_rel_err(analytic, numeric), 1e-7);
}

TEST(Autodiff, HvpIsLinearInDirection) {
  Rng rng(111);
  Graph g = mlp_graph(rng);
  GradientVector p = random_params(g, 222);
  GradientVector v = random_params(g, 333, 1.0);
  GradientVector w = random_params(g, 444, 1.0);

  GradientVector combo = v;
  combo *= 2.5;
  combo.axpy(-1.25, w);
  GradientVector lhs = g.hvp(p, combo);

  GradientVector rhs = g.hvp(p, v);
  rhs *= 2.5;
  rhs.axpy(-1.25, g.hvp(p, w));
  EXPECT_LT(max_rel_err(lhs, rhs), 1e-12);
}

TEST(Autodiff, HvpIsSymmetric) {
  Rng rng(555);
  Graph g = cnn_graph(rng);
  GradientVector p = random_params(g, 666);
  GradientVector v = random_params(g, 777, 1.0);
  GradientVector w = random_params(g, 888, 1.0);
  double vhw = dot(v, g.hvp(p, w));
  double whv = dot(w, g.hvp(p, v));
  EXPECT_NEAR(vhw, whv, 1e-10 * (1.0 + std::abs(vhw)));
}

TEST(Autodiff, RepeatedEvaluationIsBitwiseStable) {
  Rng rng(123);
  Graph g = mlp_graph(rng);
  GradientVector p = random_params(g, 321);
  GradientVector g1 = g.gradient(p);
  double l1 = g.evaluate(p);
  GradientVector v = random_params(g, 432, 1.0);
  GradientVector h1 = g.hvp(p, v);

  GradientVector g2 = g.gradient(p);
  double l2 = g.evaluate(p);
  GradientVector h2 = g.hvp(p, v);

  EXPECT_EQ(l1, l2);
  for (std::size_t i = 0; i < g1.parts.size(); ++i)
    EXPECT_EQ(g1.parts[i].data, g2.parts[i].data);
  for (std::size_t i = 0; i < h1.parts.size(); ++i)
    EXPECT_EQ(h1.parts[i].data, h2.parts[i].data);
}

TEST(Autodiff, GradientAgreesWithHvpDirectionalDerivativeOfLoss) {
  // d/dt L(p + t v) at 0 equals <grad, v>; second derivative equals <v, H v>
  Rng rng(999);
  Graph g = mlp_graph(rng);
  GradientVector p = random_params(g, 1111);
  GradientVector v = random_params(g, 2222, 1.0);

  const double eps = 1e-5;
  GradientVector hi = p, lo = p;
  hi.axpy(eps, v);
  lo.axpy(-eps, v);
  double lp = g.evaluate(hi), lm = g.evaluate(lo), l0 = g.evaluate(p);

  double first = dot(g.gradient(p), v);
  EXPECT_NEAR((lp - lm) / (2 * eps), first, 1e-8 * (1 + std::abs(first)));

  double second = dot(v, g.hvp(p, v));
  EXPECT_NEAR((lp - 2 * l0 + lm) / (eps * eps), second, 1e-4 * (1 + std::abs(second)));
}

TEST(Autodiff, ValidatesShapesAndArguments) {
  Graph g;
  int x = g.param({2, 3});
  int w = g.param({4, 5});
  EXPECT_THROW(g.matmul(x, w), std::invalid_argument);

  int k_even = g.param({1, 1, 2, 2});
  int img = g.param({1, 1, 4, 4});
  EXPECT_THROW(g.conv2d(img, k_even), std::invalid_argument);

  int bias_wrong = g.param({4});
  EXPECT_THROW(g.bias_add(x, bias_wrong), std::invalid_argument);
  EXPECT_THROW(g.channel_scale(x, bias_wrong), std::invalid_argument);

  EXPECT_THROW(g.softmax_cross_entropy(x, {0, 1, 2}, 1.0), std::invalid_argument);  // label count
  EXPECT_THROW(g.softmax_cross_entropy(x, {0, 3}, 1.0), std::invalid_argument);     // label range
  EXPECT_THROW(g.softmax_cross_entropy(x, {0, 1}, 0.0), std::invalid_argument);     // temperature
  EXPECT_THROW(g.set_output(x), std::invalid_argument);                             // non-scalar
}

TEST(Autodiff, ParameterBindingValidation) {
  int theta_id;
  Graph g = quadratic_graph(kA, theta_id);
  GradientVector wrong_count;
  EXPECT_THROW(g.evaluate(wrong_count), std::invalid_argument);
  GradientVector wrong_shape;
  wrong_shape.parts.push_back(Tensor({4}));
  EXPECT_THROW(g.evaluate(wrong_shape), std::invalid_argument);

  GradientVector ok;
  ok.parts.push_back(Tensor({1, 4}, {1, 0, 0, 0}));
  GradientVector bad_dir;
  bad_dir.parts.push_back(Tensor({2, 2}, {1, 0, 0, 0}));
  EXPECT_THROW(g.hvp(ok, bad_dir), std::invalid_argument);
}

TEST(Autodiff, ReluGatesGradient) {
  Graph g;
  int x = g.param({1, 2});
  g.set_output(g.sum(g.relu(x)));
  GradientVector p;
  p.parts.push_back(Tensor({1, 2}, {3.0, -2.0}));
  GradientVector gr = g.gradient(p);
  EXPECT_DOUBLE_EQ(gr.parts[0].data[0], 1.0);
  EXPECT_DOUBLE_EQ(gr.parts[0].data[1], 0.0);
}

TEST(Autodiff, MeanPoolAveragesSpatially) {
  Graph g;
  int x = g.param({1, 2, 2, 2});
  g.set_output(g.sum(g.mean_pool(x)));
  GradientVector p;
  p.parts.push_back(Tensor({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40}));
  EXPECT_DOUBLE_EQ(g.evaluate(p), 2.5 + 25.0);
  GradientVector gr = g.gradient(p);
  for (double v : gr.parts[0].data) EXPECT_DOUBLE_EQ(v, 0.25);
}
