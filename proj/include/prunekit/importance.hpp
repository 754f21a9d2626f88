#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/csv.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/model.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

struct ImportanceRow {
  int layer = 0;
  int group = 0;
  double score = 0.0;       // lower = prune first, for every measure
  double signed_raw = 0.0;  // pre-normalization value, kept for analysis
};

// Per-group scores plus the context they were computed in. The score column
// is sign-normalized so mask construction can stay measure-agnostic.
struct ImportanceReport {
  std::string measure;
  double temperature = 1.0;
  long step = 0;                // training step the scores were taken at
  std::vector<int> batch_rows;  // dataset rows of the scoring batch, if any
  std::vector<ImportanceRow> rows;

  std::string to_csv() const {
    std::string out = "layer,group,score,signed_raw,measure,temperature,step\n";
    for (const auto& r : rows)
      out += csv_row(r.layer, r.group, r.score, r.signed_raw, measure, temperature, step);
    return out;
  }
};

namespace detail {

inline void check_all_finite(const ImportanceReport& report) {
  for (const auto& r : report.rows)
    if (!std::isfinite(r.score) || !std::isfinite(r.signed_raw))
      throw std::runtime_error("importance measure '" + report.measure +
                               "' produced a non-finite score");
}

inline ImportanceReport make_report(std::string measure, const std::vector<PruneGroup>& groups,
                                    long step) {
  ImportanceReport rep;
  rep.measure = std::move(measure);
  rep.step = step;
  rep.rows.reserve(groups.size());
  for (const auto& g : groups) rep.rows.push_back({g.layer, g.group, 0.0, 0.0});
  return rep;
}

inline void require_param_aligned(const Network& net, const GradientVector& v, const char* what) {
  if (!v.same_shape(net.params))
    throw std::invalid_argument(std::string(what) + ": vector does not match network parameters");
}

}  // namespace detail

// Sum of squared parameter values per group.
inline ImportanceReport magnitude(const Network& net, const std::vector<PruneGroup>& groups,
                                  long step = 0) {
  ImportanceReport rep = detail::make_report("magnitude", groups, step);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double s = 0.0;
    for (auto [part, off] : groups[i].indices) {
      double t = net.params.parts[part].data[off];
      s += t * t;
    }
    rep.rows[i].score = s;
    rep.rows[i].signed_raw = s;
  }
  detail::check_all_finite(rep);
  return rep;
}

// |sum of theta_i * g_i| per group; the signed sum is kept as raw.
inline ImportanceReport loss_preservation(const Network& net,
                                          const std::vector<PruneGroup>& groups,
                                          const GradientVector& gradient, long step = 0) {
  detail::require_param_aligned(net, gradient, "loss_preservation");
  ImportanceReport rep = detail::make_report("loss_preservation", groups, step);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double s = 0.0;
    for (auto [part, off] : groups[i].indices)
      s += net.params.parts[part].data[off] * gradient.parts[part].data[off];
    rep.rows[i].score = std::abs(s);
    rep.rows[i].signed_raw = s;
  }
  detail::check_all_finite(rep);
  return rep;
}

// Sum of |theta_i| * |theta_i g_i| per group: small-magnitude parameters that
// also do not affect the loss go first.
inline ImportanceReport proposed_extension(const Network& net,
                                           const std::vector<PruneGroup>& groups,
                                           const GradientVector& gradient, long step = 0) {
  detail::require_param_aligned(net, gradient, "proposed_extension");
  ImportanceReport rep = detail::make_report("proposed_extension", groups, step);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double s = 0.0;
    for (auto [part, off] : groups[i].indices) {
      double t = net.params.parts[part].data[off];
      s += std::abs(t) * std::abs(t * gradient.parts[part].data[off]);
    }
    rep.rows[i].score = s;
    rep.rows[i].signed_raw = s;
  }
  detail::check_all_finite(rep);
  return rep;
}

// theta^T (H g) per group given a precomputed Hessian-gradient product.
// Signed score: the most negative groups (the ones whose removal most
// increases the gradient norm) rank as most prunable.
inline ImportanceReport grasp_from_hvp(const Network& net, const std::vector<PruneGroup>& groups,
                                       const GradientVector& hg, double temperature,
                                       long step = 0) {
  detail::require_param_aligned(net, hg, "grasp_from_hvp");
  ImportanceReport rep = detail::make_report("grasp", groups, step);
  rep.temperature = temperature;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double s = 0.0;
    for (auto [part, off] : groups[i].indices)
      s += net.params.parts[part].data[off] * hg.parts[part].data[off];
    rep.rows[i].score = s;
    rep.rows[i].signed_raw = s;
  }
  detail::check_all_finite(rep);
  return rep;
}

// As above, with g and H taken on the given scoring batch at the given
// softmax temperature.
inline ImportanceReport grasp(const Network& net, const std::vector<PruneGroup>& groups,
                              const Tensor& inputs, const std::vector<int>& labels,
                              double temperature, long step = 0) {
  if (temperature <= 0.0) throw std::invalid_argument("grasp: temperature must be positive");
  LossGraph lg = build_loss_graph(net, inputs, labels, temperature);
  GradientVector g = lg.graph.gradient(net.params);
  GradientVector hg = lg.graph.hvp(net.params, g);
  return grasp_from_hvp(net, groups, hg, temperature, step);
}

// |theta^T (H g)| per group: keeps gradient-norm-relevant groups regardless of
// the direction they push it.
inline ImportanceReport grasp_preserve(const Network& net, const std::vector<PruneGroup>& groups,
                                       const Tensor& inputs, const std::vector<int>& labels,
                                       double temperature, long step = 0) {
  ImportanceReport rep = grasp(net, groups, inputs, labels, temperature, step);
  rep.measure = "grasp_preserve";
  for (auto& r : rep.rows) r.score = std::abs(r.signed_raw);
  return rep;
}

// Seeded i.i.d. uniform [0,1) score per group.
inline ImportanceReport random_importance(const Network&, const std::vector<PruneGroup>& groups,
                                          std::uint64_t seed, long step = 0) {
  ImportanceReport rep = detail::make_report("random", groups, step);
  Rng rng(mix_seed(seed, 4));
  for (auto& r : rep.rows) {
    r.score = rng.uniform();
    r.signed_raw = r.score;
  }
  return rep;
}

// Per-layer copy of the scale parameters, for epoch-to-epoch deltas.
inline std::vector<Tensor> sigma_snapshot(const Network& net) {
  std::vector<Tensor> out;
  out.reserve(net.layers.size());
  for (const Layer& layer : net.layers) out.push_back(net.params.parts[layer.scale_part]);
  return out;
}

// |sigma| * |sigma - sigma_prev| per filter; requires structured groups since
// the measure is defined on whole filters.
inline ImportanceReport ebt_proxy(const Network& net, const std::vector<PruneGroup>& groups,
                                  const std::vector<Tensor>& prev_sigma, long step = 0) {
  if (prev_sigma.size() != net.layers.size())
    throw std::invalid_argument("ebt_proxy: scale snapshot missing or wrong layer count");
  for (std::size_t li = 0; li < net.layers.size(); ++li)
    if (prev_sigma[li].shape != net.params.parts[net.layers[li].scale_part].shape)
      throw std::invalid_argument("ebt_proxy: scale snapshot shape mismatch");
  if (groups.size() != [&] {
        std::size_t n = 0;
        for (const auto& l : net.layers) n += l.filters;
        return n;
      }())
    throw std::invalid_argument("ebt_proxy: needs structured (per-filter) groups");

  ImportanceReport rep = detail::make_report("ebt_proxy", groups, step);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    double now = net.params.parts[net.layers[g.layer].scale_part].data[g.group];
    double prev = prev_sigma[g.layer].data[g.group];
    double s = std::abs(now) * std::abs(now - prev);
    rep.rows[i].score = s;
    rep.rows[i].signed_raw = now - prev;
  }
  detail::check_all_finite(rep);
  return rep;
}

}  // namespace prunekit
