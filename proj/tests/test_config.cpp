#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>
#include <string>

#include "prunekit/config.hpp"

using namespace prunekit;
using nlohmann::json;

namespace {

// Expects a ConfigError whose dotted path matches exactly.
template <typename Fn>
void expect_config_error(Fn&& fn, const std::string& path) {
  try {
    fn();
    FAIL() << "expected a config error at " << path;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), path) << e.what();
  }
}

json minimal() { return json::object(); }

}  // namespace

TEST(Config, EmptyObjectYieldsDefaults) {
  ExperimentConfig cfg = parse_experiment_config(minimal());
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.data.classes, 3);
  EXPECT_EQ(cfg.model.kind, "mlp");
  EXPECT_EQ(cfg.model.widths, (std::vector<int>{2, 16, 3}));
  EXPECT_EQ(cfg.train.measure, "magnitude");
  EXPECT_EQ(cfg.train.seed, 1u);
  EXPECT_EQ(cfg.flow.system, "network");
  EXPECT_EQ(cfg.compare.measures.size(), 3u);
}

TEST(Config, SeedPropagatesIntoTraining) {
  json raw = minimal();
  raw["seed"] = 42;
  ExperimentConfig cfg = parse_experiment_config(raw);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.train.seed, 42u);
}

TEST(Config, UnknownFieldsAreRejectedWithTheirPath) {
  auto with = [](const char* pointer, json value) {
    json raw = json::object();
    raw[json::json_pointer(pointer)] = std::move(value);
    return raw;
  };
  expect_config_error([&] { parse_experiment_config(with("/bogus", 1)); }, "bogus");
  expect_config_error([&] { parse_experiment_config(with("/data/bogus", 1)); }, "data.bogus");
  expect_config_error([&] { parse_experiment_config(with("/model/bogus", 1)); }, "model.bogus");
  expect_config_error([&] { parse_experiment_config(with("/train/bogus", 1)); }, "train.bogus");
  expect_config_error([&] { parse_experiment_config(with("/flow/bogus", 1)); }, "flow.bogus");
  expect_config_error([&] { parse_experiment_config(with("/flow/sgd/bogus", 1)); },
                      "flow.sgd.bogus");
  expect_config_error([&] { parse_experiment_config(with("/compare/bogus", 1)); },
                      "compare.bogus");
  expect_config_error([&] { parse_experiment_config(with("/analyze/bogus", 1)); },
                      "analyze.bogus");
}

TEST(Config, RangeAndTypeErrorsCarryFieldPaths) {
  auto with = [](const char* pointer, json value) {
    json raw = json::object();
    raw[json::json_pointer(pointer)] = std::move(value);
    return raw;
  };
  expect_config_error([&] { parse_experiment_config(with("/data/classes", 1)); },
                      "data.classes");
  expect_config_error([&] { parse_experiment_config(with("/train/batch_size", 0)); },
                      "train.batch_size");
  expect_config_error([&] { parse_experiment_config(with("/train/batch_size", "big")); },
                      "train.batch_size");
  expect_config_error([&] { parse_experiment_config(with("/train/momentum", 1.5)); },
                      "train.momentum");
  expect_config_error([&] { parse_experiment_config(with("/train/measure", "psychic")); },
                      "train.measure");
  expect_config_error([&] { parse_experiment_config(with("/train/lr_schedule", json::array())); },
                      "train.lr_schedule");
  expect_config_error(
      [&] { parse_experiment_config(with("/train/lr_schedule", json::parse("[{\"rate\":0.1}]"))); },
      "train.lr_schedule[0]");
  expect_config_error([&] { parse_experiment_config(with("/model/kind", "rnn")); },
                      "model.kind");
  expect_config_error([&] { parse_experiment_config(with("/flow/step", 0.0)); }, "flow.step");
  expect_config_error([&] { parse_experiment_config(with("/flow/integrator", "leapfrog")); },
                      "flow.integrator");
  expect_config_error([&] { parse_experiment_config(with("/seeds", json::array())); }, "seeds");
  expect_config_error([&] { parse_experiment_config(with("/seeds", json::parse("[1,-2]"))); },
                      "seeds[1]");
  expect_config_error(
      [&] { parse_experiment_config(with("/compare/measures", json::parse("[\"nope\"]"))); },
      "compare.measures[0]");
}

TEST(Config, CrossFieldChecksNameTheOffendingField) {
  json raw = minimal();
  raw["model"] = {{"kind", "mlp"}, {"widths", {5, 4, 3}}};
  expect_config_error([&] { parse_experiment_config(raw); }, "model.widths");

  raw = minimal();
  raw["data"] = {{"dims", 9}};
  raw["model"] = {{"kind", "cnn"}, {"in_channels", 1}, {"in_h", 2}, {"in_w", 2}};
  expect_config_error([&] { parse_experiment_config(raw); }, "model.in_channels");

  raw = minimal();
  raw["data"] = {{"dims", 16}};
  raw["model"] = {{"kind", "cnn"}, {"in_h", 4}, {"in_w", 4}, {"kernel", 2}};
  expect_config_error([&] { parse_experiment_config(raw); }, "model.kernel");
}

TEST(Config, QuadraticSystemMustBeSymmetricAndSized) {
  json raw = minimal();
  raw["flow"] = {{"system", "quadratic"},
                 {"quadratic", {{"matrix", {{1, 2}, {3, 1}}}, {"theta0", {1, 1}}}}};
  expect_config_error([&] { parse_experiment_config(raw); }, "flow.quadratic.matrix");

  raw["flow"]["quadratic"]["matrix"] = {{1, 2}, {2, 1}};
  raw["flow"]["quadratic"]["theta0"] = {1, 1, 1};
  expect_config_error([&] { parse_experiment_config(raw); }, "flow.quadratic.theta0");

  raw["flow"]["quadratic"]["theta0"] = {1, 1};
  EXPECT_NO_THROW(parse_experiment_config(raw));
}

TEST(Config, OverridesParseJsonValuesAndCreatePaths) {
  json raw = minimal();
  apply_override(raw, "train.rounds=5");
  apply_override(raw, "model.activation=relu");
  apply_override(raw, "train.temperature_all_epochs=true");
  apply_override(raw, "compare.rounds=[2,3]");
  apply_override(raw, "flow.sgd.rate=0.5");
  apply_override(raw, "data.dims=4");
  apply_override(raw, "model.widths=[4,6,3]");

  EXPECT_EQ(raw["train"]["rounds"], 5);
  EXPECT_EQ(raw["model"]["activation"], "relu");  // bare word becomes a string
  EXPECT_EQ(raw["train"]["temperature_all_epochs"], true);
  EXPECT_EQ(raw["compare"]["rounds"], json::parse("[2,3]"));
  EXPECT_EQ(raw["flow"]["sgd"]["rate"], 0.5);

  ExperimentConfig cfg = parse_experiment_config(raw);
  EXPECT_EQ(cfg.train.rounds, 5);
  EXPECT_EQ(cfg.model.activation, Activation::kRelu);
  EXPECT_EQ(cfg.flow.sgd_rate, 0.5);
}

TEST(Config, MalformedOverridesAreRejected) {
  json raw = minimal();
  EXPECT_THROW(apply_override(raw, "noequals"), ConfigError);
  EXPECT_THROW(apply_override(raw, "=5"), ConfigError);
  EXPECT_THROW(apply_override(raw, "a..b=1"), ConfigError);
  raw["train"] = 7;  // path runs through a non-object
  EXPECT_THROW(apply_override(raw, "train.rounds=1"), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
  json a = json::parse(R"({"seed": 3, "data": {"dims": 2, "classes": 3}})");
  json b = json::parse(R"({"data": {"classes": 3, "dims": 2}, "seed": 3})");
  EXPECT_EQ(config_hash(parse_experiment_config(a)), config_hash(parse_experiment_config(b)));

  json c = a;
  c["train"]["rounds"] = 1;
  EXPECT_NE(config_hash(parse_experiment_config(a)), config_hash(parse_experiment_config(c)));
}

TEST(Config, ResolvedJsonIsAFixpoint) {
  json raw = minimal();
  raw["seed"] = 5;
  raw["train"] = {{"rounds", 2}, {"target_fraction", 0.4},
                  {"lr_schedule", json::parse(R"([{"rate":0.1,"epochs":3}])")}};
  ExperimentConfig cfg = parse_experiment_config(raw);
  json resolved = to_json(cfg);
  ExperimentConfig reparsed = parse_experiment_config(resolved);
  EXPECT_EQ(to_json(reparsed).dump(), resolved.dump());

  json cnn = minimal();
  cnn["data"] = {{"dims", 16}};
  cnn["model"] = {{"kind", "cnn"}, {"in_h", 4}, {"in_w", 4}};
  json cnn_resolved = to_json(parse_experiment_config(cnn));
  EXPECT_EQ(to_json(parse_experiment_config(cnn_resolved)).dump(), cnn_resolved.dump());
}

TEST(Config, BuildersHonorTheConfig) {
  json raw = minimal();
  raw["data"] = {{"classes", 4}, {"dims", 3}, {"per_class", 5}, {"spread", 0.1}, {"seed", 9}};
  raw["model"] = {{"kind", "mlp"}, {"widths", {3, 6, 4}}};
  ExperimentConfig cfg = parse_experiment_config(raw);

  Dataset ds = make_dataset(cfg.data);
  EXPECT_EQ(ds.size(), 20u);
  EXPECT_EQ(ds.dims(), 3);
  Network net = make_network(cfg.model, 7);
  ASSERT_EQ(net.layers.size(), 2u);
  EXPECT_EQ(net.layers[0].filters, 6);
  EXPECT_EQ(net.classes, 4);

  json cnn = minimal();
  cnn["data"] = {{"dims", 16}, {"classes", 3}};
  cnn["model"] = {{"kind", "cnn"}, {"in_h", 4}, {"in_w", 4}, {"channels", {2, 3}}};
  Network conv = make_network(parse_experiment_config(cnn).model, 7);
  ASSERT_EQ(conv.layers.size(), 3u);
  EXPECT_EQ(conv.layers[0].kind, LayerKind::kConv);
  EXPECT_EQ(conv.layers[1].filters, 3);
}

TEST(Config, LoadConfigJsonReportsFileProblems) {
  EXPECT_THROW(load_config_json("/nonexistent/prunekit.json"), ConfigError);

  std::string path = ::testing::TempDir() + "prunekit_bad_config.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_config_json(path), ConfigError);

  std::string good = ::testing::TempDir() + "prunekit_good_config.json";
  std::ofstream(good) << R"({"seed": 8})";
  EXPECT_EQ(parse_experiment_config(load_config_json(good)).seed, 8u);
}
