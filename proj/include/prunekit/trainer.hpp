#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/csv.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/masking.hpp"
#include "prunekit/model.hpp"

namespace prunekit {

struct LrPhase {
  double rate = 0.1;
  int epochs = 1;
};

// Training protocol: the first `rounds` epochs of the first rate phase train
// at the pruning temperature and each ends with score-and-extend-mask; the
// rest of the schedule trains normally. Total epoch count is independent of
// `rounds`, so every measure gets the same optimizer budget.
struct TrainConfig {
  std::vector<LrPhase> lr_schedule = {{0.1, 30}, {0.01, 10}, {0.001, 10}};
  int batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double train_temperature = 5.0;      // softmax temperature while pruning runs
  bool temperature_all_epochs = false; // apply it to the whole run instead
  std::uint64_t seed = 1;
  int rounds = 0;  // 0 = plain training without pruning
  double target_fraction = 0.0;
  std::string measure = "magnitude";
  double grasp_temperature = 200.0;
  double grasp_preserve_temperature = 1.0;
  int scoring_per_class = 2;
  int keep_floor = 1;
  Granularity granularity = Granularity::kStructured;
  double eval_fraction = 0.2;
  bool record_param_snapshots = false;  // keep per-epoch parameter copies in memory

  int total_epochs() const {
    int total = 0;
    for (const auto& p : lr_schedule) total += p.epochs;
    return total;
  }
  double rate_for_epoch(int epoch) const {  // 1-based
    int seen = 0;
    for (const auto& p : lr_schedule) {
      seen += p.epochs;
      if (epoch <= seen) return p.rate;
    }
    return lr_schedule.back().rate;
  }
};

inline const std::vector<std::string>& importance_measures() {
  static const std::vector<std::string> names = {
      "magnitude", "loss_preservation", "proposed_extension", "grasp",
      "grasp_preserve", "random", "ebt_proxy", "uniform"};
  return names;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = 0.0;
  double pruned_fraction = 0.0;        // fraction of groups pruned
  double pruned_param_fraction = 0.0;  // fraction of scalar parameters pruned
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  std::vector<int> mask_round_epochs;  // epoch index each mask extension happened at
  long total_sgd_steps = 0;

  std::string to_csv() const {
    std::string out = "epoch,train_loss,train_acc,eval_acc,pruned_fraction,pruned_param_fraction\n";
    for (const auto& e : epochs)
      out += csv_row(e.epoch, e.train_loss, e.train_acc, e.eval_acc, e.pruned_fraction,
                     e.pruned_param_fraction);
    return out;
  }
};

struct TrainResult {
  RunLog log;
  Mask mask;  // final mask (all-keep when rounds == 0)
  std::vector<Mask> round_masks;
  std::vector<ImportanceReport> round_reports;  // empty rows for the uniform baseline
  std::vector<int> floor_limited_layers;        // union over rounds
  std::vector<std::vector<Tensor>> sigma_per_epoch;   // scale snapshot after each epoch
  std::vector<GradientVector> params_per_epoch;       // filled when configured
};

// One SGD step on one minibatch: d = keep ∘ (grad + wd·θ), v = m·v + d,
// θ ← θ − η·v. Masked parameters receive no update and keep zero velocity.
// Returns the pre-step minibatch loss.
inline double sgd_step(Network& net, const Tensor& inputs, const std::vector<int>& labels,
                       double rate, double momentum, double weight_decay, double temperature,
                       GradientVector& velocity, const GradientVector* keep) {
  if (labels.empty()) throw std::invalid_argument("sgd_step: empty batch");
  if (rate <= 0.0) throw std::invalid_argument("sgd_step: rate must be positive");
  LossGraph lg = build_loss_graph(net, inputs, labels, temperature);
  GradientVector d = lg.graph.gradient(net.params);
  const double loss = lg.graph.output_value();
  if (!velocity.same_shape(net.params)) velocity = GradientVector::zeros_like(net.params);
  for (std::size_t p = 0; p < d.parts.size(); ++p)
    for (std::size_t i = 0; i < d.parts[p].data.size(); ++i) {
      double step = d.parts[p].data[i] + weight_decay * net.params.parts[p].data[i];
      if (keep) step *= keep->parts[p].data[i];
      double v = momentum * velocity.parts[p].data[i] + step;
      velocity.parts[p].data[i] = v;
      net.params.parts[p].data[i] -= rate * v;
    }
  return loss;
}

// Mean gradient over a fixed contiguous partition of the given rows,
// sample-weighted so it equals the gradient of the mean loss over all rows.
inline GradientVector full_batch_gradient(const Network& net, const Dataset& ds,
                                          const std::vector<int>& rows, double temperature,
                                          int batch_size) {
  if (rows.empty()) throw std::invalid_argument("full_batch_gradient: no rows");
  if (batch_size < 1) throw std::invalid_argument("full_batch_gradient: bad batch size");
  GradientVector acc = GradientVector::zeros_like(net.params);
  const double n = static_cast<double>(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    std::vector<int> chunk(rows.begin() + start,
                           rows.begin() + std::min(rows.size(), start + batch_size));
    Tensor inputs = gather_inputs(ds, chunk, net.input_shape);
    LossGraph lg = build_loss_graph(net, inputs, gather_labels(ds, chunk), temperature);
    GradientVector g = lg.graph.gradient(net.params);
    acc.axpy(chunk.size() / n, g);
  }
  return acc;
}

// Score every group with the named measure. Gradient-based measures use the
// scoring batch at `gradient_temperature`; the two curvature measures carry
// their own temperatures.
inline ImportanceReport compute_importance(const std::string& measure, const Network& net,
                                           const std::vector<PruneGroup>& groups,
                                           const Dataset& ds,
                                           const std::vector<int>& scoring_rows,
                                           double gradient_temperature, double grasp_temperature,
                                           double grasp_preserve_temperature, std::uint64_t seed,
                                           const std::vector<Tensor>* prev_sigma, long step) {
  if (measure == "magnitude") return magnitude(net, groups, step);
  if (measure == "random") return random_importance(net, groups, seed, step);
  if (measure == "ebt_proxy") {
    if (!prev_sigma)
      throw std::invalid_argument("compute_importance: ebt_proxy needs a scale snapshot");
    return ebt_proxy(net, groups, *prev_sigma, step);
  }
  Tensor inputs = gather_inputs(ds, scoring_rows, net.input_shape);
  std::vector<int> labels = gather_labels(ds, scoring_rows);
  if (measure == "grasp") return grasp(net, groups, inputs, labels, grasp_temperature, step);
  if (measure == "grasp_preserve")
    return grasp_preserve(net, groups, inputs, labels, grasp_preserve_temperature, step);
  if (measure == "loss_preservation" || measure == "proposed_extension") {
    LossGraph lg = build_loss_graph(net, inputs, labels, gradient_temperature);
    GradientVector g = lg.graph.gradient(net.params);
    ImportanceReport rep = measure == "loss_preservation"
                               ? loss_preservation(net, groups, g, step)
                               : proposed_extension(net, groups, g, step);
    rep.temperature = gradient_temperature;
    return rep;
  }
  std::string known;
  for (const auto& m : importance_measures()) known += (known.empty() ? "" : ", ") + m;
  throw std::invalid_argument("compute_importance: unknown measure '" + measure +
                              "' (expected one of: " + known + ")");
}

namespace detail {

inline void validate_config(const TrainConfig& cfg) {
  if (cfg.lr_schedule.empty()) throw std::invalid_argument("config: empty learning-rate schedule");
  for (const auto& p : cfg.lr_schedule) {
    if (p.rate <= 0.0) throw std::invalid_argument("config: learning rates must be positive");
    if (p.epochs < 0) throw std::invalid_argument("config: phase epochs must be nonnegative");
  }
  if (cfg.total_epochs() < 1) throw std::invalid_argument("config: schedule has no epochs");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch size must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("config: momentum must be in [0,1)");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("config: weight decay must be nonnegative");
  if (cfg.train_temperature <= 0.0)
    throw std::invalid_argument("config: training temperature must be positive");
  if (cfg.eval_fraction < 0.0 || cfg.eval_fraction >= 1.0)
    throw std::invalid_argument("config: eval fraction must be in [0,1)");
  if (cfg.rounds < 0) throw std::invalid_argument("config: rounds must be nonnegative");
  if (cfg.rounds > 0) {
    if (cfg.rounds > cfg.lr_schedule.front().epochs)
      throw std::invalid_argument(
          "config: pruning rounds cannot exceed the first learning-rate phase");
    if (!(cfg.target_fraction > 0.0 && cfg.target_fraction < 1.0))
      throw std::invalid_argument("config: target fraction must be in (0,1)");
    bool ok = false;
    for (const auto& m : importance_measures()) ok |= m == cfg.measure;
    if (!ok) throw std::invalid_argument("config: unknown measure '" + cfg.measure + "'");
    if (cfg.measure == "ebt_proxy" && cfg.granularity != Granularity::kStructured)
      throw std::invalid_argument("config: ebt_proxy is defined on whole filters only");
    if (cfg.keep_floor < 0) throw std::invalid_argument("config: keep floor must be nonnegative");
    if (cfg.scoring_per_class < 1)
      throw std::invalid_argument("config: scoring batch needs at least one row per class");
  }
}

}  // namespace detail

// The full protocol: `rounds` epochs of train-then-prune (extending the mask
// along an even cumulative schedule), then the rest of the epoch budget as
// plain training under the final mask.
inline TrainResult prune_and_train(Network& net, const Dataset& ds, const TrainConfig& cfg) {
  detail::validate_config(cfg);
  const bool pruning = cfg.rounds > 0;

  Split split = split_dataset(ds, cfg.eval_fraction, cfg.seed);
  if (split.train.empty()) throw std::invalid_argument("prune_and_train: empty train split");
  const bool needs_scoring_batch =
      pruning && (cfg.measure == "grasp" || cfg.measure == "grasp_preserve" ||
                  cfg.measure == "loss_preservation" || cfg.measure == "proposed_extension");
  std::vector<int> scoring_rows;
  if (needs_scoring_batch)
    scoring_rows = scoring_batch(ds, split.train, cfg.scoring_per_class, cfg.seed);

  auto groups = prune_groups(net, cfg.granularity);
  const double total_params = static_cast<double>(net.num_parameters());
  Schedule schedule = pruning ? make_schedule(cfg.target_fraction, cfg.rounds) : Schedule{};

  TrainResult result;
  result.mask.granularity = cfg.granularity;
  for (const auto& g : groups) result.mask.entries.push_back({g.layer, g.group, true});

  GradientVector velocity = GradientVector::zeros_like(net.params);
  GradientVector keep = keep_vector(net, result.mask);
  std::vector<Tensor> prev_sigma = sigma_snapshot(net);
  double pruned_params = 0.0;

  const int total_epochs = cfg.total_epochs();
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const double rate = cfg.rate_for_epoch(epoch);
    const bool pruning_phase = pruning && epoch <= cfg.rounds;
    const double temperature =
        (pruning_phase || (pruning && cfg.temperature_all_epochs)) ? cfg.train_temperature : 1.0;

    std::vector<int> order = split.train;
    Rng shuffler(mix_seed(mix_seed(cfg.seed, 6), static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<int> chunk(order.begin() + start,
                             order.begin() + std::min(order.size(), start + cfg.batch_size));
      Tensor inputs = gather_inputs(ds, chunk, net.input_shape);
      double loss = sgd_step(net, inputs, gather_labels(ds, chunk), rate, cfg.momentum,
                             cfg.weight_decay, temperature, velocity, &keep);
      loss_sum += loss * chunk.size();
      result.log.total_sgd_steps++;
    }

    if (pruning_phase) {
      const long step = result.log.total_sgd_steps;
      const double target = schedule.cumulative[epoch - 1];
      MaskBuild built;
      if (cfg.measure == "uniform") {
        built = uniform_mask(net, target, mix_seed(cfg.seed, 7), cfg.granularity, &result.mask,
                             cfg.keep_floor);
        ImportanceReport placeholder;
        placeholder.measure = "uniform";
        placeholder.step = step;
        result.round_reports.push_back(std::move(placeholder));
      } else {
        ImportanceReport rep = compute_importance(
            cfg.measure, net, groups, ds, scoring_rows, temperature, cfg.grasp_temperature,
            cfg.grasp_preserve_temperature, mix_seed(mix_seed(cfg.seed, 7), epoch), &prev_sigma,
            step);
        rep.batch_rows = scoring_rows;
        built = build_mask(rep, target, &result.mask, cfg.keep_floor, cfg.granularity);
        result.round_reports.push_back(std::move(rep));
      }
      result.mask = built.mask;
      for (int l : built.floor_limited_layers)
        if (std::find(result.floor_limited_layers.begin(), result.floor_limited_layers.end(), l) ==
            result.floor_limited_layers.end())
          result.floor_limited_layers.push_back(l);
      apply_mask(net, result.mask);
      keep = keep_vector(net, result.mask);
      // stale momentum must not resurrect pruned weights
      for (std::size_t p = 0; p < velocity.parts.size(); ++p)
        for (std::size_t i = 0; i < velocity.parts[p].data.size(); ++i)
          velocity.parts[p].data[i] *= keep.parts[p].data[i];
      pruned_params = 0.0;
      for (const auto& part : keep.parts)
        for (double v : part.data) pruned_params += v == 0.0 ? 1.0 : 0.0;
      result.round_masks.push_back(result.mask);
      result.log.mask_round_epochs.push_back(epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / order.size();
    Tensor train_inputs = gather_inputs(ds, split.train, net.input_shape);
    rec.train_acc =
        evaluate_network(net, train_inputs, gather_labels(ds, split.train), temperature).accuracy;
    if (!split.eval.empty()) {
      Tensor eval_inputs = gather_inputs(ds, split.eval, net.input_shape);
      rec.eval_acc =
          evaluate_network(net, eval_inputs, gather_labels(ds, split.eval), temperature).accuracy;
    }
    rec.pruned_fraction = result.mask.pruned_fraction();
    rec.pruned_param_fraction = pruned_params / total_params;
    result.log.epochs.push_back(rec);

    prev_sigma = sigma_snapshot(net);
    result.sigma_per_epoch.push_back(prev_sigma);
    if (cfg.record_param_snapshots) result.params_per_epoch.push_back(net.params);
  }
  return result;
}

}  // namespace prunekit
