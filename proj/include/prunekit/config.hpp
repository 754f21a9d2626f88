#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/flow.hpp"
#include "prunekit/hash.hpp"
#include "prunekit/model.hpp"
#include "prunekit/tensor.hpp"
#include "prunekit/trainer.hpp"

namespace prunekit {

// Schema violation carrying the dotted path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error("config error at " + (path.empty() ? std::string("<root>") : path) +
                           ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct DataConfig {
  int classes = 3;
  int dims = 2;
  int per_class = 40;
  double spread = 0.15;
  std::uint64_t seed = 7;
};

struct ModelConfig {
  std::string kind = "mlp";  // mlp | cnn
  std::vector<int> widths = {2, 16, 3};
  int in_channels = 1;
  int in_h = 4;
  int in_w = 4;
  std::vector<int> channels = {4};
  int kernel = 3;
  int classes = 3;
  Activation activation = Activation::kTanh;
};

struct QuadraticConfig {
  std::vector<std::vector<double>> matrix = {{2, 1, 0, 0},  //
                                             {1, 3, 1, 0},
                                             {0, 1, 4, 1},
                                             {0, 0, 1, 5}};
  std::vector<double> theta0 = {1.0, -1.0, 2.0, 0.5};
};

struct FlowConfig {
  std::string system = "network";  // network | quadratic
  double step = 0.01;
  int steps = 100;
  Integrator integrator = Integrator::kRk4;
  double temperature = 1.0;
  int rows = 0;  // 0 = whole dataset
  double sgd_rate = 1e-3;
  int sgd_minibatches = 4;
  int enumeration_cap = 8;
  QuadraticConfig quadratic;
};

struct CompareConfig {
  std::vector<std::string> measures = {"magnitude", "loss_preservation", "proposed_extension"};
  std::vector<int> rounds = {1, 5};
};

struct AnalyzeConfig {
  double prune_target = 0.5;  // magnitude/distance prune-set overlap target
  double mask_target = 0.2;   // scale-magnitude mask fraction for the delta trace
  double temperature = 1.0;   // scoring temperature for the studies
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  FlowConfig flow;
  CompareConfig compare;
  AnalyzeConfig analyze;
};

namespace cfgdetail {

using nlohmann::json;

inline std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void require_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
}

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(join(path, key), "unknown field");
  }
}

inline long get_int(const json& obj, const std::string& path, const char* key, long fallback,
                    long lo, long hi) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError(join(path, key), "expected an integer");
  long x = v.get<long>();
  if (x < lo || x > hi)
    throw ConfigError(join(path, key), "must be between " + std::to_string(lo) + " and " +
                                           std::to_string(hi));
  return x;
}

inline double get_num(const json& obj, const std::string& path, const char* key, double fallback,
                      double lo, double hi) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  double x = v.get<double>();
  if (!(x >= lo && x <= hi))
    throw ConfigError(join(path, key), "must be in [" + format_double(lo) + ", " +
                                           format_double(hi) + "]");
  return x;
}

inline bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return v.get<bool>();
}

inline std::string get_str(const json& obj, const std::string& path, const char* key,
                           std::string fallback, const std::vector<std::string>& allowed) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  std::string s = v.get<std::string>();
  if (!allowed.empty()) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || s == a;
    if (!ok) {
      std::string msg = "must be one of {";
      for (std::size_t i = 0; i < allowed.size(); ++i)
        msg += (i ? ", " : "") + allowed[i];
      throw ConfigError(join(path, key), msg + "}");
    }
  }
  return s;
}

inline std::vector<int> get_int_list(const json& obj, const std::string& path, const char* key,
                                     std::vector<int> fallback, long lo, long hi) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty())
    throw ConfigError(join(path, key), "expected a non-empty array");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& e = v[i];
    std::string epath = join(path, key) + "[" + std::to_string(i) + "]";
    if (!e.is_number_integer()) throw ConfigError(epath, "expected an integer");
    long x = e.get<long>();
    if (x < lo || x > hi)
      throw ConfigError(epath, "must be between " + std::to_string(lo) + " and " +
                                   std::to_string(hi));
    out.push_back(static_cast<int>(x));
  }
  return out;
}

inline DataConfig parse_data(const json& root) {
  DataConfig d;
  if (!root.contains("data")) return d;
  const json& obj = root.at("data");
  require_object(obj, "data");
  reject_unknown(obj, "data", {"classes", "dims", "per_class", "spread", "seed"});
  d.classes = static_cast<int>(get_int(obj, "data", "classes", d.classes, 2, 64));
  d.dims = static_cast<int>(get_int(obj, "data", "dims", d.dims, 1, 4096));
  d.per_class = static_cast<int>(get_int(obj, "data", "per_class", d.per_class, 1, 100000));
  d.spread = get_num(obj, "data", "spread", d.spread, 0.0, 1e6);
  d.seed = static_cast<std::uint64_t>(
      get_int(obj, "data", "seed", static_cast<long>(d.seed), 0, std::numeric_limits<long>::max()));
  return d;
}

inline ModelConfig parse_model(const json& root, const DataConfig& data) {
  ModelConfig m;
  m.classes = data.classes;
  m.widths = {data.dims, 16, data.classes};
  if (root.contains("model")) {
    const json& obj = root.at("model");
    require_object(obj, "model");
    reject_unknown(obj, "model",
                   {"kind", "widths", "in_channels", "in_h", "in_w", "channels", "kernel",
                    "classes", "activation"});
    m.kind = get_str(obj, "model", "kind", m.kind, {"mlp", "cnn"});
    m.widths = get_int_list(obj, "model", "widths", m.widths, 1, 65536);
    m.in_channels = static_cast<int>(get_int(obj, "model", "in_channels", m.in_channels, 1, 64));
    m.in_h = static_cast<int>(get_int(obj, "model", "in_h", m.in_h, 1, 256));
    m.in_w = static_cast<int>(get_int(obj, "model", "in_w", m.in_w, 1, 256));
    m.channels = get_int_list(obj, "model", "channels", m.channels, 1, 1024);
    m.kernel = static_cast<int>(get_int(obj, "model", "kernel", m.kernel, 1, 15));
    m.classes = static_cast<int>(get_int(obj, "model", "classes", m.classes, 2, 64));
    m.activation = activation_from_string(
        get_str(obj, "model", "activation", to_string(m.activation), {"tanh", "relu"}));
  }
  if (m.kind == "mlp") {
    if (m.widths.size() < 2) throw ConfigError("model.widths", "need at least two widths");
    if (m.widths.front() != data.dims)
      throw ConfigError("model.widths", "first width must equal data.dims (" +
                                            std::to_string(data.dims) + ")");
    if (m.widths.back() != data.classes)
      throw ConfigError("model.widths", "last width must equal data.classes (" +
                                            std::to_string(data.classes) + ")");
  } else {
    if (m.kernel % 2 == 0) throw ConfigError("model.kernel", "kernel must be odd");
    if (m.in_channels * m.in_h * m.in_w != data.dims)
      throw ConfigError("model.in_channels",
                        "in_channels*in_h*in_w must equal data.dims (" +
                            std::to_string(data.dims) + ")");
    if (m.classes != data.classes)
      throw ConfigError("model.classes", "must equal data.classes");
  }
  return m;
}

inline TrainConfig parse_train(const json& root, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  if (!root.contains("train")) return t;
  const json& obj = root.at("train");
  require_object(obj, "train");
  reject_unknown(obj, "train",
                 {"lr_schedule", "batch_size", "momentum", "weight_decay", "train_temperature",
                  "temperature_all_epochs", "rounds", "target_fraction", "measure",
                  "grasp_temperature", "grasp_preserve_temperature", "scoring_per_class",
                  "keep_floor", "granularity", "eval_fraction", "record_param_snapshots"});
  if (obj.contains("lr_schedule")) {
    const json& sched = obj.at("lr_schedule");
    if (!sched.is_array() || sched.empty())
      throw ConfigError("train.lr_schedule", "expected a non-empty array of phases");
    t.lr_schedule.clear();
    for (std::size_t i = 0; i < sched.size(); ++i) {
      std::string path = "train.lr_schedule[" + std::to_string(i) + "]";
      const json& phase = sched[i];
      require_object(phase, path);
      reject_unknown(phase, path, {"rate", "epochs"});
      if (!phase.contains("rate") || !phase.contains("epochs"))
        throw ConfigError(path, "each phase needs rate and epochs");
      LrPhase p;
      p.rate = get_num(phase, path, "rate", 0.0, 1e-12, 1e6);
      p.epochs = static_cast<int>(get_int(phase, path, "epochs", 0, 1, 100000));
      t.lr_schedule.push_back(p);
    }
  }
  t.batch_size = static_cast<int>(get_int(obj, "train", "batch_size", t.batch_size, 1, 1 << 20));
  t.momentum = get_num(obj, "train", "momentum", t.momentum, 0.0, 0.999999);
  t.weight_decay = get_num(obj, "train", "weight_decay", t.weight_decay, 0.0, 1.0);
  t.train_temperature =
      get_num(obj, "train", "train_temperature", t.train_temperature, 1e-6, 1e6);
  t.temperature_all_epochs =
      get_bool(obj, "train", "temperature_all_epochs", t.temperature_all_epochs);
  t.rounds = static_cast<int>(get_int(obj, "train", "rounds", t.rounds, 0, 100000));
  t.target_fraction = get_num(obj, "train", "target_fraction", t.target_fraction, 0.0,
                              1.0 - 1e-9);
  t.measure = get_str(obj, "train", "measure", t.measure, importance_measures());
  t.grasp_temperature = get_num(obj, "train", "grasp_temperature", t.grasp_temperature, 1e-6, 1e6);
  t.grasp_preserve_temperature = get_num(obj, "train", "grasp_preserve_temperature",
                                         t.grasp_preserve_temperature, 1e-6, 1e6);
  t.scoring_per_class =
      static_cast<int>(get_int(obj, "train", "scoring_per_class", t.scoring_per_class, 1, 10000));
  t.keep_floor = static_cast<int>(get_int(obj, "train", "keep_floor", t.keep_floor, 0, 100000));
  t.granularity = granularity_from_string(
      get_str(obj, "train", "granularity", to_string(t.granularity),
              {"structured", "unstructured"}));
  t.eval_fraction = get_num(obj, "train", "eval_fraction", t.eval_fraction, 0.0, 0.999999);
  t.record_param_snapshots =
      get_bool(obj, "train", "record_param_snapshots", t.record_param_snapshots);
  return t;
}

inline FlowConfig parse_flow(const json& root) {
  FlowConfig f;
  if (!root.contains("flow")) return f;
  const json& obj = root.at("flow");
  require_object(obj, "flow");
  reject_unknown(obj, "flow",
                 {"system", "step", "steps", "integrator", "temperature", "rows", "sgd",
                  "quadratic"});
  f.system = get_str(obj, "flow", "system", f.system, {"network", "quadratic"});
  f.step = get_num(obj, "flow", "step", f.step, 1e-12, 1e6);
  f.steps = static_cast<int>(get_int(obj, "flow", "steps", f.steps, 1, 1000000));
  f.integrator =
      integrator_from_string(get_str(obj, "flow", "integrator", to_string(f.integrator),
                                     {"euler", "rk4"}));
  f.temperature = get_num(obj, "flow", "temperature", f.temperature, 1e-6, 1e6);
  f.rows = static_cast<int>(get_int(obj, "flow", "rows", f.rows, 0, 1 << 24));
  if (obj.contains("sgd")) {
    const json& sgd = obj.at("sgd");
    require_object(sgd, "flow.sgd");
    reject_unknown(sgd, "flow.sgd", {"rate", "minibatches", "enumeration_cap"});
    f.sgd_rate = get_num(sgd, "flow.sgd", "rate", f.sgd_rate, 1e-12, 1e6);
    f.enumeration_cap =
        static_cast<int>(get_int(sgd, "flow.sgd", "enumeration_cap", f.enumeration_cap, 1, 64));
    f.sgd_minibatches = static_cast<int>(
        get_int(sgd, "flow.sgd", "minibatches", f.sgd_minibatches, 1, f.enumeration_cap));
  }
  if (obj.contains("quadratic")) {
    const json& q = obj.at("quadratic");
    require_object(q, "flow.quadratic");
    reject_unknown(q, "flow.quadratic", {"matrix", "theta0"});
    if (q.contains("matrix")) {
      const json& m = q.at("matrix");
      if (!m.is_array() || m.empty())
        throw ConfigError("flow.quadratic.matrix", "expected a non-empty array of rows");
      f.quadratic.matrix.clear();
      for (std::size_t i = 0; i < m.size(); ++i) {
        const json& row = m[i];
        std::string path = "flow.quadratic.matrix[" + std::to_string(i) + "]";
        if (!row.is_array() || row.size() != m.size())
          throw ConfigError(path, "matrix must be square");
        std::vector<double> r;
        for (const json& e : row) {
          if (!e.is_number()) throw ConfigError(path, "expected numbers");
          r.push_back(e.get<double>());
        }
        f.quadratic.matrix.push_back(std::move(r));
      }
      for (std::size_t i = 0; i < f.quadratic.matrix.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
          if (f.quadratic.matrix[i][j] != f.quadratic.matrix[j][i])
            throw ConfigError("flow.quadratic.matrix", "matrix must be symmetric");
    }
    if (q.contains("theta0")) {
      const json& t0 = q.at("theta0");
      if (!t0.is_array()) throw ConfigError("flow.quadratic.theta0", "expected an array");
      f.quadratic.theta0.clear();
      for (const json& e : t0) {
        if (!e.is_number()) throw ConfigError("flow.quadratic.theta0", "expected numbers");
        f.quadratic.theta0.push_back(e.get<double>());
      }
    }
    if (f.quadratic.theta0.size() != f.quadratic.matrix.size())
      throw ConfigError("flow.quadratic.theta0", "length must match the matrix dimension");
  }
  return f;
}

inline CompareConfig parse_compare(const json& root) {
  CompareConfig c;
  if (!root.contains("compare")) return c;
  const json& obj = root.at("compare");
  require_object(obj, "compare");
  reject_unknown(obj, "compare", {"measures", "rounds"});
  if (obj.contains("measures")) {
    const json& m = obj.at("measures");
    if (!m.is_array() || m.empty())
      throw ConfigError("compare.measures", "expected a non-empty array");
    c.measures.clear();
    const std::vector<std::string> known = importance_measures();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const json& e = m[i];
      std::string path = "compare.measures[" + std::to_string(i) + "]";
      if (!e.is_string()) throw ConfigError(path, "expected a string");
      std::string name = e.get<std::string>();
      bool ok = false;
      for (const auto& k : known) ok = ok || name == k;
      if (!ok) throw ConfigError(path, "unknown measure: " + name);
      c.measures.push_back(name);
    }
  }
  c.rounds = get_int_list(obj, "compare", "rounds", c.rounds, 1, 100000);
  return c;
}

inline AnalyzeConfig parse_analyze(const json& root) {
  AnalyzeConfig a;
  if (!root.contains("analyze")) return a;
  const json& obj = root.at("analyze");
  require_object(obj, "analyze");
  reject_unknown(obj, "analyze", {"prune_target", "mask_target", "temperature"});
  a.prune_target = get_num(obj, "analyze", "prune_target", a.prune_target, 1e-9, 1.0 - 1e-9);
  a.mask_target = get_num(obj, "analyze", "mask_target", a.mask_target, 1e-9, 1.0 - 1e-9);
  a.temperature = get_num(obj, "analyze", "temperature", a.temperature, 1e-6, 1e6);
  return a;
}

}  // namespace cfgdetail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& root) {
  using namespace cfgdetail;
  require_object(root, "");
  reject_unknown(root, "", {"seed", "seeds", "data", "model", "train", "flow", "compare",
                            "analyze"});
  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(get_int(root, "", "seed", static_cast<long>(cfg.seed), 0,
                                                std::numeric_limits<long>::max()));
  if (root.contains("seeds")) {
    const nlohmann::json& s = root.at("seeds");
    if (!s.is_array() || s.empty()) throw ConfigError("seeds", "expected a non-empty array");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const nlohmann::json& e = s[i];
      if (!e.is_number_integer() || e.get<long>() < 0)
        throw ConfigError("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
  }
  cfg.data = parse_data(root);
  cfg.model = parse_model(root, cfg.data);
  cfg.train = parse_train(root, cfg.seed);
  cfg.flow = parse_flow(root);
  cfg.compare = parse_compare(root);
  cfg.analyze = parse_analyze(root);
  return cfg;
}

// Applies one "dotted.path=value" override onto the raw JSON tree. Values
// that parse as JSON are taken verbatim; everything else becomes a string.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key.path=value");
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  nlohmann::json* node = &root;
  std::size_t pos = 0;
  while (true) {
    std::size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ConfigError(path, "override path has an empty segment");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(parsed);
      return;
    }
    if (!node->contains(key)) (*node)[key] = nlohmann::json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError(path.substr(0, dot), "not an object");
    pos = dot + 1;
  }
}

inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  nlohmann::json root = nlohmann::json::parse(in, nullptr, false);
  if (root.is_discarded()) throw ConfigError(path, "invalid JSON");
  return root;
}

// Fully resolved settings serialized back out, so the config hash covers
// every value that shapes a run, defaults included.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json root;
  root["seed"] = cfg.seed;
  root["seeds"] = cfg.seeds;
  root["data"] = {{"classes", cfg.data.classes},
                  {"dims", cfg.data.dims},
                  {"per_class", cfg.data.per_class},
                  {"spread", cfg.data.spread},
                  {"seed", cfg.data.seed}};
  nlohmann::json model = {{"kind", cfg.model.kind},
                          {"classes", cfg.model.classes},
                          {"activation", to_string(cfg.model.activation)}};
  if (cfg.model.kind == "mlp") {
    model["widths"] = cfg.model.widths;
  } else {
    model["in_channels"] = cfg.model.in_channels;
    model["in_h"] = cfg.model.in_h;
    model["in_w"] = cfg.model.in_w;
    model["channels"] = cfg.model.channels;
    model["kernel"] = cfg.model.kernel;
  }
  root["model"] = std::move(model);
  nlohmann::json sched = nlohmann::json::array();
  for (const LrPhase& p : cfg.train.lr_schedule)
    sched.push_back({{"rate", p.rate}, {"epochs", p.epochs}});
  root["train"] = {{"lr_schedule", std::move(sched)},
                   {"batch_size", cfg.train.batch_size},
                   {"momentum", cfg.train.momentum},
                   {"weight_decay", cfg.train.weight_decay},
                   {"train_temperature", cfg.train.train_temperature},
                   {"temperature_all_epochs", cfg.train.temperature_all_epochs},
                   {"rounds", cfg.train.rounds},
                   {"target_fraction", cfg.train.target_fraction},
                   {"measure", cfg.train.measure},
                   {"grasp_temperature", cfg.train.grasp_temperature},
                   {"grasp_preserve_temperature", cfg.train.grasp_preserve_temperature},
                   {"scoring_per_class", cfg.train.scoring_per_class},
                   {"keep_floor", cfg.train.keep_floor},
                   {"granularity", to_string(cfg.train.granularity)},
                   {"eval_fraction", cfg.train.eval_fraction},
                   {"record_param_snapshots", cfg.train.record_param_snapshots}};
  root["flow"] = {{"system", cfg.flow.system},
                  {"step", cfg.flow.step},
                  {"steps", cfg.flow.steps},
                  {"integrator", to_string(cfg.flow.integrator)},
                  {"temperature", cfg.flow.temperature},
                  {"rows", cfg.flow.rows},
                  {"sgd",
                   {{"rate", cfg.flow.sgd_rate},
                    {"minibatches", cfg.flow.sgd_minibatches},
                    {"enumeration_cap", cfg.flow.enumeration_cap}}},
                  {"quadratic",
                   {{"matrix", cfg.flow.quadratic.matrix},
                    {"theta0", cfg.flow.quadratic.theta0}}}};
  root["compare"] = {{"measures", cfg.compare.measures}, {"rounds", cfg.compare.rounds}};
  root["analyze"] = {{"prune_target", cfg.analyze.prune_target},
                     {"mask_target", cfg.analyze.mask_target},
                     {"temperature", cfg.analyze.temperature}};
  return root;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return sha1_hex(to_json(cfg).dump());
}

inline Dataset make_dataset(const DataConfig& d) {
  return make_blobs(d.classes, d.dims, d.per_class, d.spread, d.seed);
}

inline Network make_network(const ModelConfig& m, std::uint64_t seed) {
  if (m.kind == "mlp") return build_mlp(m.widths, m.activation, seed);
  return build_cnn(m.in_channels, m.in_h, m.in_w, m.channels, m.kernel, m.classes, m.activation,
                   seed);
}

}  // namespace prunekit
