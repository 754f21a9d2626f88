#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/csv.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/masking.hpp"
#include "prunekit/model.hpp"
#include "prunekit/stats.hpp"
#include "prunekit/trainer.hpp"

namespace prunekit {

struct CorrelationResult {
  std::string measure_a;
  std::string measure_b;
  std::optional<double> pearson_r;    // nullopt = degenerate variance
  std::optional<double> spearman_rho;
  std::size_t samples = 0;
  long stamp = 0;  // epoch or step the scores were taken at
  Granularity granularity = Granularity::kStructured;
};

struct ScatterPoint {
  int layer = 0;
  int group = 0;
  double score_a = 0.0;
  double score_b = 0.0;
};

struct CorrelationStudy {
  CorrelationResult result;
  std::vector<ScatterPoint> points;

  std::string to_csv() const {
    std::string out = "layer,group,score_a,score_b\n";
    for (const auto& p : points)
      out += csv_row(p.layer, p.group, p.score_a, p.score_b);
    return out;
  }
};

namespace detail {

inline CorrelationResult correlate(std::string measure_a, std::string measure_b,
                                   const std::vector<double>& a, const std::vector<double>& b,
                                   long stamp, Granularity granularity) {
  CorrelationResult r;
  r.measure_a = std::move(measure_a);
  r.measure_b = std::move(measure_b);
  r.pearson_r = pearson(a, b);
  r.spearman_rho = spearman(a, b);
  r.samples = a.size();
  r.stamp = stamp;
  r.granularity = granularity;
  return r;
}

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : "nan";
}

}  // namespace detail

inline std::string correlation_csv(const std::vector<CorrelationResult>& results) {
  std::string out = "measure_a,measure_b,pearson,spearman,samples,stamp,granularity\n";
  for (const auto& r : results)
    out += csv_row(r.measure_a, r.measure_b, detail::opt_field(r.pearson_r),
                   detail::opt_field(r.spearman_rho), r.samples, r.stamp,
                   to_string(r.granularity));
  return out;
}

inline std::vector<ScatterPoint> parse_scatter_csv(const std::string& text) {
  const std::string header = "layer,group,score_a,score_b";
  std::vector<ScatterPoint> points;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (first) {
      if (line != header) throw std::invalid_argument("parse_scatter_csv: bad header: " + line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    ScatterPoint p;
    const char* it = line.data();
    const char* end = line.data() + line.size();
    auto field = [&](auto& value) {
      auto [next, ec] = std::from_chars(it, end, value);
      if (ec != std::errc{}) throw std::invalid_argument("parse_scatter_csv: bad row: " + line);
      it = next;
      if (it < end && *it == ',') ++it;
    };
    field(p.layer);
    field(p.group);
    field(p.score_a);
    field(p.score_b);
    if (it != end) throw std::invalid_argument("parse_scatter_csv: trailing data: " + line);
    points.push_back(p);
  }
  if (first) throw std::invalid_argument("parse_scatter_csv: empty input");
  return points;
}

// Per-group signed curvature score theta.(Hg) against signed loss-preservation
// theta.g, from a precomputed gradient and Hessian-gradient product.
inline CorrelationStudy grasp_vs_loss_correlation(const Network& net,
                                                  const std::vector<PruneGroup>& groups,
                                                  const GradientVector& gradient,
                                                  const GradientVector& hg, double temperature,
                                                  long stamp, Granularity granularity) {
  ImportanceReport curvature = grasp_from_hvp(net, groups, hg, temperature, stamp);
  ImportanceReport preserve = loss_preservation(net, groups, gradient, stamp);
  std::vector<double> a(groups.size()), b(groups.size());
  CorrelationStudy study;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    a[i] = curvature.rows[i].signed_raw;
    b[i] = preserve.rows[i].signed_raw;
    study.points.push_back({groups[i].layer, groups[i].group, a[i], b[i]});
  }
  study.result = detail::correlate("grasp", "loss_preservation", a, b, stamp, granularity);
  return study;
}

// Same study evaluated on the full-batch tempered loss over dataset rows.
inline CorrelationStudy grasp_vs_loss_correlation(const Network& net, const Dataset& ds,
                                                  const std::vector<int>& rows,
                                                  double temperature, Granularity granularity,
                                                  long stamp = 0) {
  std::vector<PruneGroup> groups = prune_groups(net, granularity);
  Tensor inputs = gather_inputs(ds, rows, net.input_shape);
  LossGraph lg = build_loss_graph(net, inputs, gather_labels(ds, rows), temperature);
  GradientVector g = lg.graph.gradient(net.params);
  GradientVector hg = lg.graph.hvp(net.params, g);
  return grasp_vs_loss_correlation(net, groups, g, hg, temperature, stamp, granularity);
}

namespace detail {

inline ImportanceReport scale_magnitude_report(const std::vector<PruneGroup>& groups,
                                               const std::vector<Tensor>& sigma, long step) {
  ImportanceReport rep;
  rep.measure = "scale_magnitude";
  rep.step = step;
  for (const auto& g : groups) {
    if (g.layer < 0 || g.layer >= static_cast<int>(sigma.size()) || g.group < 0 ||
        g.group >= static_cast<int>(sigma[g.layer].numel()))
      throw std::invalid_argument("scale_magnitude_report: group outside scale snapshot");
    double s = sigma[g.layer].data[g.group];
    rep.rows.push_back({g.layer, g.group, std::abs(s), s});
  }
  return rep;
}

}  // namespace detail

struct EbtTracePoint {
  int epoch = 0;                  // 1-based index of the interval's end epoch
  CorrelationResult corr;         // |sigma * delta sigma| vs loss-preservation
  std::size_t mask_distance = 0;  // between consecutive scale-magnitude masks
};

inline std::string ebt_trace_csv(const std::vector<EbtTracePoint>& points) {
  std::string out = "epoch,pearson,spearman,mask_distance\n";
  for (const auto& p : points)
    out += csv_row(p.epoch, detail::opt_field(p.corr.pearson_r),
                   detail::opt_field(p.corr.spearman_rho), p.mask_distance);
  return out;
}

// Per-epoch correlation between the scale-delta proxy |sigma| * |delta sigma|
// and the loss-preservation score per filter, plus the Hamming distance
// between consecutive epochs' bottom-`mask_target` scale-magnitude masks.
// Needs the recorded per-epoch scale and parameter snapshots of a run.
inline std::vector<EbtTracePoint> ebt_correlation_trace(const Network& arch,
                                                        const TrainResult& run,
                                                        const Dataset& ds,
                                                        const std::vector<int>& rows,
                                                        double temperature,
                                                        double mask_target = 0.2) {
  const std::size_t epochs = run.sigma_per_epoch.size();
  if (epochs < 2)
    throw std::invalid_argument("ebt_correlation_trace: need at least two recorded epochs");
  if (run.params_per_epoch.size() != epochs)
    throw std::invalid_argument(
        "ebt_correlation_trace: run is missing per-epoch parameter snapshots");
  if (mask_target < 0.0 || mask_target >= 1.0)
    throw std::invalid_argument("ebt_correlation_trace: mask target outside [0,1)");

  std::vector<PruneGroup> groups = prune_groups(arch, Granularity::kStructured);
  Network net = arch;
  std::vector<EbtTracePoint> trace;
  Mask prev_mask =
      build_mask(detail::scale_magnitude_report(groups, run.sigma_per_epoch[0], 0), mask_target,
                 nullptr, 0, Granularity::kStructured)
          .mask;
  for (std::size_t k = 1; k < epochs; ++k) {
    net.params = run.params_per_epoch[k];
    ImportanceReport delta =
        ebt_proxy(net, groups, run.sigma_per_epoch[k - 1], static_cast<long>(k));
    GradientVector g =
        full_batch_gradient(net, ds, rows, temperature, static_cast<int>(rows.size()));
    ImportanceReport preserve = loss_preservation(net, groups, g, static_cast<long>(k));

    std::vector<double> a(groups.size()), b(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      a[i] = delta.rows[i].score;
      b[i] = preserve.rows[i].score;
    }
    EbtTracePoint point;
    point.epoch = static_cast<int>(k);
    point.corr = detail::correlate("ebt_proxy", "loss_preservation", a, b, static_cast<long>(k),
                                   Granularity::kStructured);
    Mask cur =
        build_mask(detail::scale_magnitude_report(groups, run.sigma_per_epoch[k],
                                                  static_cast<long>(k)),
                   mask_target, nullptr, 0, Granularity::kStructured)
            .mask;
    point.mask_distance = mask_distance(prev_mask, cur);
    prev_mask = std::move(cur);
    trace.push_back(std::move(point));
  }
  return trace;
}

struct OverlapStudy {
  CorrelationResult result;
  std::vector<ScatterPoint> points;  // score_a = ||theta_p||^2, score_b = drift^2
  double prune_overlap = 1.0;        // shared fraction of the two induced prune sets
};

// Per-group squared magnitude against squared distance from initialization,
// with the overlap of the prune sets both rankings induce at `prune_target`.
inline OverlapStudy l2_vs_distance_correlation(const Network& net, Granularity granularity,
                                               double prune_target = 0.5, long stamp = 0) {
  if (!net.init_snapshot.same_shape(net.params))
    throw std::invalid_argument("l2_vs_distance_correlation: init snapshot missing or stale");
  std::vector<PruneGroup> groups = prune_groups(net, granularity);

  ImportanceReport l2 = magnitude(net, groups, stamp);
  ImportanceReport drift;
  drift.measure = "distance_from_init";
  drift.step = stamp;
  for (const auto& g : groups) {
    double s = 0.0;
    for (auto [part, offset] : g.indices) {
      double d = net.params.parts[part].data[offset] - net.init_snapshot.parts[part].data[offset];
      s += d * d;
    }
    drift.rows.push_back({g.layer, g.group, s, s});
  }

  OverlapStudy study;
  std::vector<double> a(groups.size()), b(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    a[i] = l2.rows[i].score;
    b[i] = drift.rows[i].score;
    study.points.push_back({groups[i].layer, groups[i].group, a[i], b[i]});
  }
  study.result = detail::correlate("magnitude", "distance_from_init", a, b, stamp, granularity);

  Mask by_l2 = build_mask(l2, prune_target, nullptr, 0, granularity).mask;
  Mask by_drift = build_mask(drift, prune_target, nullptr, 0, granularity).mask;
  std::set<std::pair<int, int>> pruned_l2;
  for (const auto& e : by_l2.entries)
    if (!e.kept) pruned_l2.insert({e.layer, e.group});
  std::size_t shared = 0, total = 0;
  for (const auto& e : by_drift.entries)
    if (!e.kept) {
      ++total;
      shared += pruned_l2.count({e.layer, e.group});
    }
  study.prune_overlap = total == 0 ? 1.0 : static_cast<double>(shared) / total;
  return study;
}

// Per-layer squared gradient norm of the full-batch tempered loss.
inline std::vector<double> layerwise_grad_norm2(const Network& net, const Dataset& ds,
                                                const std::vector<int>& rows,
                                                double temperature) {
  GradientVector g =
      full_batch_gradient(net, ds, rows, temperature, static_cast<int>(rows.size()));
  std::vector<double> out;
  for (const Layer& layer : net.layers) {
    double acc = 0.0;
    for (int p = layer.weight_part; p <= layer.bias_part; ++p)
      for (double v : g.parts[p].data) acc += v * v;
    out.push_back(acc);
  }
  return out;
}

inline std::string layerwise_csv(const std::vector<double>& values, const std::string& column) {
  std::string out = "layer," + column + "\n";
  for (std::size_t l = 0; l < values.size(); ++l)
    out += csv_row(l, values[l]);
  return out;
}

struct CorrelationSummary {
  std::size_t runs = 0;
  std::size_t defined_pearson = 0;
  std::size_t defined_spearman = 0;
  std::optional<double> mean_pearson;
  std::optional<double> mean_spearman;
};

// Averages the defined coefficients across per-seed results.
inline CorrelationSummary average_correlations(const std::vector<CorrelationResult>& results) {
  CorrelationSummary s;
  s.runs = results.size();
  double sp = 0.0, sr = 0.0;
  for (const auto& r : results) {
    if (r.pearson_r) {
      sp += *r.pearson_r;
      ++s.defined_pearson;
    }
    if (r.spearman_rho) {
      sr += *r.spearman_rho;
      ++s.defined_spearman;
    }
  }
  if (s.defined_pearson) s.mean_pearson = sp / s.defined_pearson;
  if (s.defined_spearman) s.mean_spearman = sr / s.defined_spearman;
  return s;
}

}  // namespace prunekit
