#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/autodiff.hpp"
#include "prunekit/csv.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/model.hpp"
#include "prunekit/trainer.hpp"

namespace prunekit {

enum class Integrator { kEuler, kRk4 };

inline const char* to_string(Integrator i) { return i == Integrator::kEuler ? "euler" : "rk4"; }
inline Integrator integrator_from_string(const std::string& s) {
  if (s == "euler") return Integrator::kEuler;
  if (s == "rk4") return Integrator::kRk4;
  throw std::invalid_argument("unknown integrator: " + s);
}

struct FlowSample {
  double t = 0.0;
  double loss = 0.0;
  double norm2 = 0.0;       // ||theta||^2
  double theta_g = 0.0;     // theta . g
  double grad_norm2 = 0.0;  // ||g||^2
  double theta_hg = 0.0;    // theta . (H g)
  std::vector<double> layer_grad_norm2;
};

// Sampled trajectory of continuous-time training dtheta/dt = -g(theta).
// Parameter states are kept in memory alongside the scalar samples so bound
// checks can measure drift from the start of the trace.
struct FlowTrace {
  double step = 0.0;
  Integrator integrator = Integrator::kRk4;
  bool diverged = false;  // trace is the finite prefix when set
  std::vector<FlowSample> samples;
  std::vector<GradientVector> states;

  std::string to_csv() const {
    std::string out = "t,L,norm2,theta_g,grad_norm2,theta_Hg";
    const std::size_t layers = samples.empty() ? 0 : samples[0].layer_grad_norm2.size();
    for (std::size_t l = 0; l < layers; ++l) out += ",grad_norm2_l" + std::to_string(l);
    out += '\n';
    for (const auto& s : samples) {
      out += format_double(s.t) + ',' + format_double(s.loss) + ',' + format_double(s.norm2) +
             ',' + format_double(s.theta_g) + ',' + format_double(s.grad_norm2) + ',' +
             format_double(s.theta_hg);
      for (double v : s.layer_grad_norm2) out += ',' + format_double(v);
      out += '\n';
    }
    return out;
  }
};

namespace detail {

inline bool finite(const GradientVector& v) {
  for (const auto& part : v.parts)
    for (double x : part.data)
      if (!std::isfinite(x)) return false;
  return true;
}

inline FlowSample sample_point(Graph& g, const GradientVector& theta, double t,
                               const std::vector<std::pair<int, int>>& layer_part_ranges) {
  FlowSample s;
  s.t = t;
  GradientVector grad = g.gradient(theta);
  s.loss = g.output_value();
  s.norm2 = norm2(theta);
  s.theta_g = dot(theta, grad);
  bool tiled = !layer_part_ranges.empty();
  int next = 0;
  for (auto [begin, end] : layer_part_ranges) {
    double acc = 0.0;
    for (int p = begin; p < end; ++p)
      for (double x : grad.parts[p].data) acc += x * x;
    s.layer_grad_norm2.push_back(acc);
    tiled = tiled && begin == next;
    next = end;
  }
  tiled = tiled && next == static_cast<int>(grad.parts.size());
  if (tiled) {
    // Ranges tile every part, so the total is the sum of the per-layer terms;
    // adding them directly keeps the recorded columns consistent bit for bit.
    s.grad_norm2 = 0.0;
    for (double v : s.layer_grad_norm2) s.grad_norm2 += v;
  } else {
    s.grad_norm2 = norm2(grad);
  }
  GradientVector hg = g.hvp(theta, grad);
  s.theta_hg = dot(theta, hg);
  return s;
}

inline bool sample_finite(const FlowSample& s) {
  return std::isfinite(s.loss) && std::isfinite(s.norm2) && std::isfinite(s.theta_g) &&
         std::isfinite(s.grad_norm2) && std::isfinite(s.theta_hg);
}

}  // namespace detail

// Integrate the flow for `steps` steps of size `step`, sampling every state
// including t = 0. On non-finite state the finite prefix is returned with the
// diverged flag set.
inline FlowTrace integrate_flow(Graph& g, const GradientVector& theta0, double step, int steps,
                                Integrator integrator,
                                const std::vector<std::pair<int, int>>& layer_part_ranges = {}) {
  if (step <= 0.0) throw std::invalid_argument("integrate_flow: step must be positive");
  if (steps < 1) throw std::invalid_argument("integrate_flow: need at least one step");
  FlowTrace trace;
  trace.step = step;
  trace.integrator = integrator;

  GradientVector theta = theta0;
  for (int k = 0; k <= steps; ++k) {
    FlowSample s = detail::sample_point(g, theta, step * k, layer_part_ranges);
    if (!detail::sample_finite(s) || !detail::finite(theta)) {
      trace.diverged = true;
      break;
    }
    trace.samples.push_back(std::move(s));
    trace.states.push_back(theta);
    if (k == steps) break;

    if (integrator == Integrator::kEuler) {
      theta.axpy(-step, g.gradient(theta));
    } else {
      GradientVector k1 = g.gradient(theta);
      GradientVector p2 = theta;
      p2.axpy(-0.5 * step, k1);
      GradientVector k2 = g.gradient(p2);
      GradientVector p3 = theta;
      p3.axpy(-0.5 * step, k2);
      GradientVector k3 = g.gradient(p3);
      GradientVector p4 = theta;
      p4.axpy(-step, k3);
      GradientVector k4 = g.gradient(p4);
      // theta -= h/6 (k1 + 2 k2 + 2 k3 + k4)
      k1 += k4;
      k2 += k3;
      k1.axpy(2.0, k2);
      theta.axpy(-step / 6.0, k1);
    }
  }
  return trace;
}

// Flow of the full-batch tempered cross-entropy of a network over the given
// dataset rows, with one per-layer gradient-norm column per network layer.
inline FlowTrace integrate_flow(const Network& net, const Dataset& ds,
                                const std::vector<int>& rows, double temperature, double step,
                                int steps, Integrator integrator) {
  if (rows.empty()) throw std::invalid_argument("integrate_flow: no rows");
  Tensor inputs = gather_inputs(ds, rows, net.input_shape);
  LossGraph lg = build_loss_graph(net, inputs, gather_labels(ds, rows), temperature);
  std::vector<std::pair<int, int>> ranges;
  for (const Layer& layer : net.layers)
    ranges.emplace_back(layer.weight_part, layer.bias_part + 1);
  return integrate_flow(lg.graph, net.params, step, steps, integrator, ranges);
}

namespace detail {

inline void require_trace(const FlowTrace& trace, std::size_t min_len, const char* what) {
  if (trace.samples.size() < min_len)
    throw std::invalid_argument(std::string(what) + ": trace too short");
}

}  // namespace detail

// Max over interior points of
// |central-difference d||theta||^2/dt + 2 theta.g| / (1 + |2 theta.g|).
inline double check_first_identity(const FlowTrace& trace) {
  detail::require_trace(trace, 3, "check_first_identity");
  const double h = trace.step;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < trace.samples.size(); ++i) {
    double cd = (trace.samples[i + 1].norm2 - trace.samples[i - 1].norm2) / (2.0 * h);
    double rhs = -2.0 * trace.samples[i].theta_g;
    double resid = std::abs(cd - rhs) / (1.0 + std::abs(rhs));
    worst = std::max(worst, resid);
  }
  return worst;
}

// Max over interior points of
// |central second difference of ||theta||^2 - 2(||g||^2 + theta.Hg)| / (1 + |rhs|).
inline double check_second_identity(const FlowTrace& trace) {
  detail::require_trace(trace, 3, "check_second_identity");
  const double h = trace.step;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < trace.samples.size(); ++i) {
    double sd = (trace.samples[i + 1].norm2 - 2.0 * trace.samples[i].norm2 +
                 trace.samples[i - 1].norm2) /
                (h * h);
    double rhs = 2.0 * (trace.samples[i].grad_norm2 + trace.samples[i].theta_hg);
    double resid = std::abs(sd - rhs) / (1.0 + std::abs(rhs));
    worst = std::max(worst, resid);
  }
  return worst;
}

// Max over interior points of |central-difference dL/dt + ||g||^2| / (1 + ||g||^2):
// along the flow the loss decays at exactly the squared gradient norm.
inline double check_loss_decay_identity(const FlowTrace& trace) {
  detail::require_trace(trace, 3, "check_loss_decay_identity");
  const double h = trace.step;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < trace.samples.size(); ++i) {
    double cd = (trace.samples[i + 1].loss - trace.samples[i - 1].loss) / (2.0 * h);
    double rhs = -trace.samples[i].grad_norm2;
    double resid = std::abs(cd - rhs) / (1.0 + std::abs(rhs));
    worst = std::max(worst, resid);
  }
  return worst;
}

// Verifies (1/T)||theta(T)-theta(0)||^2 <= L(0) - L(T) at every sampled T > 0
// and returns the minimum slack (negative = violated).
inline double check_loss_bound(const FlowTrace& trace, const GradientVector& init) {
  detail::require_trace(trace, 2, "check_loss_bound");
  if (trace.states.size() != trace.samples.size())
    throw std::invalid_argument("check_loss_bound: trace is missing parameter states");
  if (!init.same_shape(trace.states[0]))
    throw std::invalid_argument("check_loss_bound: init shape mismatch");
  for (std::size_t p = 0; p < init.parts.size(); ++p)
    if (init.parts[p].data != trace.states[0].parts[p].data)
      throw std::invalid_argument("check_loss_bound: trace does not start at init");

  const double l0 = trace.samples[0].loss;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    GradientVector drift = trace.states[i];
    drift.axpy(-1.0, init);
    double lhs = norm2(drift) / trace.samples[i].t;
    double margin = (l0 - trace.samples[i].loss) - lhs;
    worst = std::min(worst, margin);
  }
  return worst;
}

// Exhaustive minibatch-expectation check of the discrete-step analogues:
// order 1 compares E[Delta ||theta||^2 / eta] against -2 theta.g and order 2
// compares E[Delta^2 ||theta||^2 / eta^2] over all ordered minibatch pairs
// against 2(||g||^2 + theta.Hg). Both residuals are pure step-size terms.
inline double sgd_expectation_check(const Network& net, const Dataset& ds,
                                    const std::vector<int>& rows, double temperature, double rate,
                                    int order, int m, int enumeration_cap = 8) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("sgd_expectation_check: order must be 1 or 2");
  if (rate <= 0.0) throw std::invalid_argument("sgd_expectation_check: rate must be positive");
  if (m < 1) throw std::invalid_argument("sgd_expectation_check: need at least one minibatch");
  if (m > enumeration_cap)
    throw std::invalid_argument("sgd_expectation_check: minibatch count exceeds enumeration cap");
  if (rows.empty() || rows.size() % static_cast<std::size_t>(m) != 0)
    throw std::invalid_argument("sgd_expectation_check: rows must split into equal minibatches");

  const std::size_t chunk = rows.size() / m;
  std::vector<std::vector<int>> batches;
  for (int i = 0; i < m; ++i)
    batches.emplace_back(rows.begin() + i * chunk, rows.begin() + (i + 1) * chunk);

  // full-batch loss carries g and H at theta
  Tensor all_inputs = gather_inputs(ds, rows, net.input_shape);
  LossGraph full = build_loss_graph(net, all_inputs, gather_labels(ds, rows), temperature);
  const GradientVector& theta = net.params;
  GradientVector g = full.graph.gradient(theta);
  const double theta_norm2 = norm2(theta);

  std::vector<LossGraph> graphs;
  graphs.reserve(m);
  for (const auto& b : batches) {
    Tensor inputs = gather_inputs(ds, b, net.input_shape);
    graphs.push_back(build_loss_graph(net, inputs, gather_labels(ds, b), temperature));
  }

  if (order == 1) {
    double expectation = 0.0;
    for (auto& lg : graphs) {
      GradientVector d = lg.graph.gradient(theta);
      GradientVector stepped = theta;
      stepped.axpy(-rate, d);
      expectation += (norm2(stepped) - theta_norm2) / rate;
    }
    expectation /= m;
    return std::abs(expectation + 2.0 * dot(theta, g));
  }

  GradientVector hg = full.graph.hvp(theta, g);
  const double reference = 2.0 * (norm2(g) + dot(theta, hg));
  double expectation = 0.0;
  for (auto& first : graphs) {
    GradientVector d1 = first.graph.gradient(theta);
    GradientVector theta1 = theta;
    theta1.axpy(-rate, d1);
    const double n1 = norm2(theta1);
    for (auto& second : graphs) {
      GradientVector d2 = second.graph.gradient(theta1);
      GradientVector theta2 = theta1;
      theta2.axpy(-rate, d2);
      expectation += (norm2(theta2) - 2.0 * n1 + theta_norm2) / (rate * rate);
    }
  }
  expectation /= static_cast<double>(m) * m;
  return std::abs(expectation - reference);
}

}  // namespace prunekit
