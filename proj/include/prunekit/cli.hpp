#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/analysis.hpp"
#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/csv.hpp"
#include "prunekit/flow.hpp"
#include "prunekit/hash.hpp"
#include "prunekit/masking.hpp"
#include "prunekit/trainer.hpp"

namespace prunekit {

namespace clidetail {

namespace fs = std::filesystem;

// Writes artifacts under the run directory and records their content hashes
// for the manifest.
struct ArtifactLog {
  fs::path dir;
  nlohmann::json hashes = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;  // seeds the command actually ran

  void text(const std::string& name, const std::string& content) {
    write_text_file((dir / name).string(), content);
    hashes[name] = sha1_hex(content);
  }
  void existing(const std::string& name) { hashes[name] = sha1_file((dir / name).string()); }
};

inline void write_manifest(const ArtifactLog& log, const std::string& command,
                           const std::string& config_hash, long elapsed_ms) {
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = config_hash;
  manifest["seeds"] = log.seeds;
  manifest["artifacts"] = log.hashes;
  manifest["timings_ms"] = {{"total", elapsed_ms}};
  write_text_file((log.dir / ("manifest_" + command + ".json")).string(),
                  manifest.dump(2) + "\n");
}

inline std::vector<int> flow_rows(const FlowConfig& flow, const Dataset& ds) {
  int n = flow.rows == 0 ? ds.size() : flow.rows;
  if (n > ds.size())
    throw ConfigError("flow.rows", "dataset has only " + std::to_string(ds.size()) + " rows");
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

struct QuadraticSystem {
  Graph graph;
  GradientVector theta0;
};

inline QuadraticSystem build_quadratic(const QuadraticConfig& q) {
  const int n = static_cast<int>(q.theta0.size());
  QuadraticSystem sys;
  Tensor a({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.data[i * n + j] = q.matrix[i][j];
  int theta = sys.graph.param({1, n});
  int m = sys.graph.mul(sys.graph.matmul(theta, sys.graph.constant(a)), theta);
  sys.graph.set_output(sys.graph.scale_const(sys.graph.sum(m), 0.5));
  Tensor t0({1, n});
  t0.data = q.theta0;
  sys.theta0.parts.push_back(t0);
  return sys;
}

inline std::string opt_csv(std::optional<double> v) {
  return v ? format_double(*v) : "nan";
}

inline double order_of(double coarse, double fine) {
  if (!(coarse > 0.0) || !(fine > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(coarse / fine);
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  Network net;
  TrainResult result;
};

inline TrainOutcome run_training(const ExperimentConfig& cfg, const TrainConfig& train,
                                 std::uint64_t seed) {
  TrainOutcome out{make_network(cfg.model, seed), {}};
  Dataset ds = make_dataset(cfg.data);
  TrainConfig tc = train;
  tc.seed = seed;
  out.result = prune_and_train(out.net, ds, tc);
  return out;
}

inline int cmd_train(const ExperimentConfig& cfg, ArtifactLog& log) {
  TrainOutcome run = run_training(cfg, cfg.train, cfg.seed);

  log.text("runlog.csv", run.result.log.to_csv());
  save_checkpoint((log.dir / "checkpoint.bin").string(), run.net);
  log.existing("checkpoint.bin");
  if (cfg.train.rounds > 0) {
    log.text("mask.csv", run.result.mask.to_csv());
    write_mask_bits((log.dir / "mask.bits").string(), run.result.mask);
    log.existing("mask.bits");
    log.text("layer_ratios.csv",
             layerwise_csv(layerwise_ratios(run.result.mask), "pruned_ratio"));
    for (std::size_t r = 0; r < run.result.round_reports.size(); ++r)
      log.text("importance_round" + std::to_string(r + 1) + ".csv",
               run.result.round_reports[r].to_csv());
  }
  log.seeds = {cfg.seed};

  const EpochRecord& last = run.result.log.epochs.back();
  std::cout << "train: " << run.result.log.epochs.size() << " epochs, final train_loss "
            << format_double(last.train_loss) << ", eval_acc " << format_double(last.eval_acc)
            << ", pruned_fraction " << format_double(last.pruned_fraction) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// flowcheck

inline int cmd_flowcheck(const ExperimentConfig& cfg, ArtifactLog& log) {
  std::string summary = "check,value\n";
  std::vector<std::string> failures;

  auto residuals_for = [&](Integrator integ, auto&& trace_at) {
    FlowTrace coarse = trace_at(cfg.flow.step, cfg.flow.steps, integ);
    FlowTrace fine = trace_at(cfg.flow.step / 2.0, cfg.flow.steps * 2, integ);
    std::string tag = to_string(integ);
    if (coarse.diverged || fine.diverged)
      failures.push_back("flow trace diverged with integrator " + tag);
    log.text("flow_" + tag + ".csv", coarse.to_csv());
    log.text("flow_" + tag + "_fine.csv", fine.to_csv());

    double f1 = check_first_identity(coarse), f1h = check_first_identity(fine);
    double f2 = check_second_identity(coarse), f2h = check_second_identity(fine);
    summary += csv_row("first_identity_residual_" + tag, f1);
    summary += csv_row("first_identity_order_" + tag, order_of(f1, f1h));
    summary += csv_row("second_identity_residual_" + tag, f2);
    summary += csv_row("second_identity_order_" + tag, order_of(f2, f2h));
    summary += csv_row("loss_decay_residual_" + tag, check_loss_decay_identity(coarse));
    return coarse;
  };

  if (cfg.flow.system == "quadratic") {
    QuadraticSystem sys = build_quadratic(cfg.flow.quadratic);
    auto trace_at = [&](double h, int steps, Integrator integ) {
      return integrate_flow(sys.graph, sys.theta0, h, steps, integ);
    };
    FlowTrace rk4 = residuals_for(Integrator::kRk4, trace_at);
    residuals_for(Integrator::kEuler, trace_at);
    double slack = check_loss_bound(rk4, sys.theta0);
    summary += csv_row("loss_bound_min_slack", slack);
    if (!(slack >= -1e-9))
      failures.push_back("loss bound violated: min slack " + format_double(slack));
  } else {
    Dataset ds = make_dataset(cfg.data);
    Network net = make_network(cfg.model, cfg.seed);
    std::vector<int> rows = flow_rows(cfg.flow, ds);
    auto trace_at = [&](double h, int steps, Integrator integ) {
      return integrate_flow(net, ds, rows, cfg.flow.temperature, h, steps, integ);
    };
    FlowTrace rk4 = residuals_for(Integrator::kRk4, trace_at);
    residuals_for(Integrator::kEuler, trace_at);
    double slack = check_loss_bound(rk4, net.params);
    summary += csv_row("loss_bound_min_slack", slack);
    if (!(slack >= -1e-9))
      failures.push_back("loss bound violated: min slack " + format_double(slack));

    if (rows.size() % static_cast<std::size_t>(cfg.flow.sgd_minibatches) != 0)
      throw ConfigError("flow.sgd.minibatches",
                        std::to_string(rows.size()) + " rows do not split into " +
                            std::to_string(cfg.flow.sgd_minibatches) + " equal minibatches");
    for (int order : {1, 2}) {
      double res = sgd_expectation_check(net, ds, rows, cfg.flow.temperature, cfg.flow.sgd_rate,
                                         order, cfg.flow.sgd_minibatches,
                                         cfg.flow.enumeration_cap);
      double half = sgd_expectation_check(net, ds, rows, cfg.flow.temperature,
                                          cfg.flow.sgd_rate / 2.0, order,
                                          cfg.flow.sgd_minibatches, cfg.flow.enumeration_cap);
      summary += csv_row("sgd_order" + std::to_string(order) + "_residual", res);
      summary += csv_row("sgd_order" + std::to_string(order) + "_ratio",
                         half > 0.0 ? res / half : std::numeric_limits<double>::quiet_NaN());
    }
  }

  log.text("flow_summary.csv", summary);
  log.seeds = {cfg.seed};
  std::cout << summary;
  for (const std::string& f : failures) std::cerr << "flowcheck: " << f << "\n";
  return failures.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const ExperimentConfig& cfg, ArtifactLog& log) {
  const int first_phase = cfg.train.lr_schedule.front().epochs;
  for (int r : cfg.compare.rounds)
    if (r > first_phase)
      throw ConfigError("compare.rounds",
                        "rounds " + std::to_string(r) +
                            " exceed the first learning-rate phase (" +
                            std::to_string(first_phase) + " epochs)");

  struct Cell {
    std::string measure;
    int rounds = 0;
    std::uint64_t seed = 0;
    TrainOutcome outcome;
  };
  std::vector<Cell> cells;
  for (const std::string& measure : cfg.compare.measures)
    for (int rounds : cfg.compare.rounds)
      for (std::uint64_t seed : cfg.seeds) cells.push_back({measure, rounds, seed, {}});

  std::vector<std::future<TrainOutcome>> futures;
  for (const Cell& cell : cells)
    futures.push_back(std::async(std::launch::async, [&cfg, cell] {
      TrainConfig tc = cfg.train;
      tc.measure = cell.measure;
      tc.rounds = cell.rounds;
      return run_training(cfg, tc, cell.seed);
    }));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].outcome = futures[i].get();

  std::string table =
      "measure,rounds,seed,final_train_loss,final_train_acc,final_eval_acc,"
      "pruned_fraction,pruned_param_fraction\n";
  for (const Cell& cell : cells) {
    const EpochRecord& last = cell.outcome.result.log.epochs.back();
    table += csv_row(cell.measure, cell.rounds, cell.seed, last.train_loss, last.train_acc,
                     last.eval_acc, last.pruned_fraction, last.pruned_param_fraction);
    log.text("runlog_" + cell.measure + "_r" + std::to_string(cell.rounds) + "_s" +
                 std::to_string(cell.seed) + ".csv",
             cell.outcome.result.log.to_csv());
  }
  log.text("comparison.csv", table);
  log.seeds = cfg.seeds;
  std::cout << table;
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

inline int cmd_analyze(const ExperimentConfig& cfg, ArtifactLog& log) {
  Dataset ds = make_dataset(cfg.data);
  std::vector<int> rows(ds.size());
  std::iota(rows.begin(), rows.end(), 0);
  const double temp = cfg.analyze.temperature;

  std::string detail_csv = "study,checkpoint,stamp,seed,granularity,pearson,spearman,samples\n";
  auto detail_row = [&](const std::string& study, const std::string& checkpoint,
                        std::uint64_t seed, const CorrelationResult& c) {
    detail_csv += csv_row(study, checkpoint, c.stamp, seed, to_string(c.granularity),
                          opt_csv(c.pearson_r), opt_csv(c.spearman_rho), c.samples);
  };

  std::vector<CorrelationResult> grasp_by_checkpoint[3];
  std::vector<CorrelationResult> l2_end;
  std::vector<double> overlaps, ebt_trends;

  bool first_seed = true;
  for (std::uint64_t seed : cfg.seeds) {
    TrainConfig tc = cfg.train;
    tc.record_param_snapshots = true;
    TrainOutcome run = run_training(cfg, tc, seed);
    const int total = static_cast<int>(run.result.params_per_epoch.size());
    const int mid = std::max(1, total / 2);

    // curvature vs loss-preservation at the three checkpoints
    const char* names[3] = {"init", "mid", "end"};
    const int stamps[3] = {0, mid, total};
    for (int c = 0; c < 3; ++c) {
      Network at = run.net;
      if (stamps[c] == 0)
        at.params = at.init_snapshot;
      else
        at.params = run.result.params_per_epoch[stamps[c] - 1];
      CorrelationStudy study = grasp_vs_loss_correlation(at, ds, rows, temp,
                                                         Granularity::kStructured, stamps[c]);
      grasp_by_checkpoint[c].push_back(study.result);
      detail_row("grasp_vs_loss", names[c], seed, study.result);
      if (first_seed)
        log.text(std::string("scatter_grasp_") + names[c] + ".csv", study.to_csv());
    }
    CorrelationStudy unstructured = grasp_vs_loss_correlation(
        run.net, ds, rows, temp, Granularity::kUnstructured, total);
    detail_row("grasp_vs_loss", "end", seed, unstructured.result);

    // squared magnitude vs squared drift at the end of training
    OverlapStudy drift = l2_vs_distance_correlation(run.net, Granularity::kStructured,
                                                    cfg.analyze.prune_target, total);
    l2_end.push_back(drift.result);
    overlaps.push_back(drift.prune_overlap);
    detail_row("l2_vs_distance", "end", seed, drift.result);
    if (first_seed) {
      CorrelationStudy scatter;
      scatter.points = drift.points;
      log.text("scatter_l2_distance.csv", scatter.to_csv());
    }

    // scale-delta proxy trace across epochs
    std::vector<EbtTracePoint> trace =
        ebt_correlation_trace(run.net, run.result, ds, rows, temp, cfg.analyze.mask_target);
    log.text("ebt_trace_s" + std::to_string(seed) + ".csv", ebt_trace_csv(trace));
    std::vector<double> epochs_axis, corr_axis;
    for (const EbtTracePoint& p : trace)
      if (p.corr.pearson_r) {
        epochs_axis.push_back(p.epoch);
        corr_axis.push_back(*p.corr.pearson_r);
      }
    if (epochs_axis.size() >= 3) {
      if (auto trend = spearman(epochs_axis, corr_axis)) ebt_trends.push_back(*trend);
    }

    if (first_seed) {
      std::string gradnorm = "epoch,layer,grad_norm2\n";
      for (int e = 0; e < total; ++e) {
        Network at = run.net;
        at.params = run.result.params_per_epoch[e];
        std::vector<double> per_layer = layerwise_grad_norm2(at, ds, rows, temp);
        for (std::size_t l = 0; l < per_layer.size(); ++l)
          gradnorm += csv_row(e + 1, l, per_layer[l]);
      }
      log.text("layerwise_gradnorm.csv", gradnorm);
      if (tc.rounds > 0)
        log.text("layer_ratios.csv",
                 layerwise_csv(layerwise_ratios(run.result.mask), "pruned_ratio"));
    }
    first_seed = false;
  }

  std::string summary = "study,checkpoint,metric,value,defined,runs\n";
  const char* names[3] = {"init", "mid", "end"};
  for (int c = 0; c < 3; ++c) {
    CorrelationSummary s = average_correlations(grasp_by_checkpoint[c]);
    summary += csv_row("grasp_vs_loss", names[c], "mean_pearson", opt_csv(s.mean_pearson),
                       s.defined_pearson, s.runs);
  }
  CorrelationSummary l2 = average_correlations(l2_end);
  summary +=
      csv_row("l2_vs_distance", "end", "mean_pearson", opt_csv(l2.mean_pearson),
              l2.defined_pearson, l2.runs);
  double overlap_sum = std::accumulate(overlaps.begin(), overlaps.end(), 0.0);
  summary += csv_row("l2_vs_distance", "end", "mean_overlap",
                     format_double(overlap_sum / overlaps.size()), overlaps.size(),
                     overlaps.size());
  if (!ebt_trends.empty()) {
    double trend_sum = std::accumulate(ebt_trends.begin(), ebt_trends.end(), 0.0);
    summary += csv_row("ebt_trace", "all", "mean_trend_spearman",
                       format_double(trend_sum / ebt_trends.size()), ebt_trends.size(),
                       cfg.seeds.size());
  } else {
    summary += csv_row("ebt_trace", "all", "mean_trend_spearman", "nan", 0, cfg.seeds.size());
  }

  log.text("analysis_correlations.csv", detail_csv);
  log.text("analysis_summary.csv", summary);
  log.seeds = cfg.seeds;
  std::cout << summary;
  return 0;
}

}  // namespace clidetail

// Entry point shared by the binary and in-process tests: args exclude the
// program name. Returns the process exit code.
inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"gradient-flow pruning workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::vector<std::string> overrides;
  std::int64_t seed_flag = -1;

  const char* subs[] = {"train", "flowcheck", "compare", "analyze"};
  const char* descs[] = {"run the prune-and-train loop",
                         "integrate the gradient flow and check its identities",
                         "fan out training runs over measures x rounds x seeds",
                         "correlation studies over a deterministic rerun"};
  for (int i = 0; i < 4; ++i) {
    CLI::App* sc = app.add_subcommand(subs[i], descs[i]);
    sc->add_option("--config", config_path, "JSON experiment config")->required();
    sc->add_option("--set", overrides, "override a config field: dotted.path=value");
    sc->add_option("--seed", seed_flag, "override the top-level seed");
    sc->add_option("--out", out_flag, "output root (default $PRUNEKIT_OUT or ./out)");
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  auto started = std::chrono::steady_clock::now();
  try {
    nlohmann::json raw = load_config_json(config_path);
    for (const std::string& s : overrides) apply_override(raw, s);
    if (seed_flag >= 0) raw["seed"] = seed_flag;
    ExperimentConfig cfg = parse_experiment_config(raw);

    std::string out_root = out_flag;
    if (out_root.empty()) {
      const char* env = std::getenv("PRUNEKIT_OUT");
      out_root = env && *env ? env : "out";
    }
    std::string hash = config_hash(cfg);
    clidetail::ArtifactLog log;
    log.dir = std::filesystem::path(out_root) / hash.substr(0, 12);
    std::filesystem::create_directories(log.dir);
    write_text_file((log.dir / "config.resolved.json").string(),
                    to_json(cfg).dump(2) + "\n");

    int rc = 0;
    if (command == "train")
      rc = clidetail::cmd_train(cfg, log);
    else if (command == "flowcheck")
      rc = clidetail::cmd_flowcheck(cfg, log);
    else if (command == "compare")
      rc = clidetail::cmd_compare(cfg, log);
    else
      rc = clidetail::cmd_analyze(cfg, log);

    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    clidetail::write_manifest(log, command, hash, elapsed);
    std::cout << command << ": run directory " << log.dir.string() << " (" << elapsed
              << " ms)\n";
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace prunekit
