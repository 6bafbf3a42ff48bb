// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/config.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include "json_reader.hpp"
#include "seqconv/errors.hpp"

namespace seqconv {

using detail::ObjectReader;
using nlohmann::json;

namespace {

std::vector<std::string> string_list(const ObjectReader& r, const char* key) {
  std::vector<std::string> out;
  if (!r.has(key)) return out;
  const json& v = r.at(key);
  if (!v.is_array()) throw ConfigError(r.child(key), "expected an array of file names");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) throw ConfigError(r.child(key) + "/" + std::to_string(i), "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

template <typename F>
auto rethrow_as_config(const std::string& path, F&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.empty() ? "/" : path, e.what());
  }
}

}  // namespace

NetworkSpec parse_network_section(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("template")) return network_spec_from_json(j, path);
  const std::string family = j.at("template").is_string() ? j.at("template").get<std::string>() : "";
  if (family == "imagenet") {
    ObjectReader r(j, path, {"template", "name"});
    const std::string name = r.string("name", "");
    return rethrow_as_config(r.child("name"), [&] { return build_imagenet_template(name); });
  }
  if (family != "cifar") {
    throw ConfigError(path + "/template", "unknown template family (expected one of: cifar, imagenet)");
  }
  ObjectReader r(j, path, {"template", "k", "r", "blocks", "variant", "classes", "aggregation", "input"});
  const int k = static_cast<int>(ObjectReader::integer_value(r.at("k"), r.child("k"), 1));
  const int rr = static_cast<int>(ObjectReader::integer_value(r.at("r"), r.child("r"), 1));
  std::array<int, 3> blocks{1, 1, 1};
  if (r.has("blocks")) {
    const json& b = r.at("blocks");
    if (b.is_array()) {
      if (b.size() != 3) throw ConfigError(r.child("blocks"), "expected 3 per-stage block counts");
      for (std::size_t i = 0; i < 3; ++i) {
        blocks[i] = static_cast<int>(ObjectReader::integer_value(b[i], r.child("blocks") + "/" + std::to_string(i), 0));
      }
    } else {
      blocks.fill(static_cast<int>(ObjectReader::integer_value(b, r.child("blocks"), 0)));
    }
  }
  const auto variant = detail::parse_enum<CifarVariant>(
      r.child("variant"), r.string("variant", "basic"),
      {{"basic", CifarVariant::basic}, {"bottleneck", CifarVariant::bottleneck}});
  const auto aggregation = detail::parse_enum<Aggregation>(
      r.child("aggregation"), r.string("aggregation", "windowed"),
      {{"dense", Aggregation::dense}, {"windowed", Aggregation::windowed}});
  const auto classes = static_cast<std::size_t>(r.integer("classes", 10, 1));
  NetworkSpec spec = rethrow_as_config(
      path, [&] { return build_cifar_template(k, rr, blocks, variant, classes, aggregation); });
  if (r.has("input")) {
    ObjectReader in(r.at("input"), r.child("input"), {"channels", "height", "width"});
    spec.in_channels = static_cast<std::size_t>(in.integer("channels", 3, 1));
    spec.input_height = static_cast<std::size_t>(in.integer("height", 32, 1));
    spec.input_width = static_cast<std::size_t>(in.integer("width", 32, 1));
    rethrow_as_config(r.child("input"), [&] {
      validate(spec);
      return 0;
    });
  }
  return spec;
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["lr0"] = cfg.lr0;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["decay_batch_norm"] = cfg.decay_batch_norm;
  j["decay_bias"] = cfg.decay_bias;
  j["schedule"] = json::array();
  for (const auto& s : cfg.schedule) j["schedule"].push_back({{"epoch", s.epoch}, {"divisor", s.divisor}});
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["dropout"] = cfg.dropout_rate;
  j["augment"] = cfg.augment;
  if (cfg.target_train_accuracy) j["target_train_accuracy"] = *cfg.target_train_accuracy;
  return j;
}

TrainConfig parse_train_section(const json& j, const std::string& path) {
  ObjectReader r(j, path,
                 {"lr0", "momentum", "weight_decay", "decay_batch_norm", "decay_bias", "schedule", "epochs",
                  "batch_size", "dropout", "augment", "target_train_accuracy"});
  TrainConfig cfg;
  cfg.lr0 = r.number("lr0", cfg.lr0);
  cfg.momentum = r.number("momentum", cfg.momentum);
  cfg.weight_decay = r.number("weight_decay", cfg.weight_decay);
  cfg.decay_batch_norm = r.boolean("decay_batch_norm", cfg.decay_batch_norm);
  cfg.decay_bias = r.boolean("decay_bias", cfg.decay_bias);
  cfg.epochs = static_cast<int>(r.integer("epochs", cfg.epochs, 0));
  cfg.batch_size = static_cast<std::size_t>(r.integer("batch_size", static_cast<long long>(cfg.batch_size), 1));
  cfg.dropout_rate = r.number("dropout", cfg.dropout_rate);
  cfg.augment = r.boolean("augment", cfg.augment);
  if (r.has("target_train_accuracy")) cfg.target_train_accuracy = r.number("target_train_accuracy", 1.0);
  if (r.has("schedule")) {
    const json& s = r.at("schedule");
    const std::string sp = r.child("schedule");
    if (s.is_string()) {
      if (s.get<std::string>() != "cifar") throw ConfigError(sp, "unknown schedule preset (expected: cifar)");
      cfg.schedule = cifar_schedule();
    } else if (s.is_object()) {
      ObjectReader e(s, sp, {"every"});
      const int every = static_cast<int>(ObjectReader::integer_value(e.at("every"), e.child("every"), 1));
      cfg.schedule = step_schedule(every, cfg.epochs);
    } else if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        ObjectReader st(s[i], sp + "/" + std::to_string(i), {"epoch", "divisor"});
        cfg.schedule.push_back({static_cast<int>(ObjectReader::integer_value(st.at("epoch"), st.child("epoch"), 0)),
                                st.number("divisor", 10.0)});
      }
    } else {
      throw ConfigError(sp, "expected \"cifar\", {\"every\": n} or a list of {epoch, divisor}");
    }
  }
  rethrow_as_config(path, [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

RunConfig parse_run_config(const json& j) {
  ObjectReader r(j, "", {"network", "train", "data", "seed", "precision", "deterministic"});
  RunConfig cfg;
  cfg.network = parse_network_section(r.at("network"), r.child("network"));
  if (r.has("train")) cfg.train = parse_train_section(r.at("train"), r.child("train"));
  cfg.train.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
  cfg.train.precision = detail::parse_enum<Precision>(r.child("precision"), r.string("precision", "single"),
                                                      {{"single", Precision::single}, {"double", Precision::double_}});
  cfg.deterministic = r.boolean("deterministic", false);
  if (r.has("data")) {
    ObjectReader d(r.at("data"), r.child("data"),
                   {"kind", "train", "test", "validation_size", "train_limit", "normalize", "synthetic"});
    DataConfig& dc = cfg.data;
    dc.kind = detail::parse_enum<DataKind>(
        d.child("kind"), d.string("kind", "synthetic"),
        {{"synthetic", DataKind::synthetic}, {"cifar10", DataKind::cifar10}, {"cifar100", DataKind::cifar100}});
    dc.train_files = string_list(d, "train");
    dc.test_files = string_list(d, "test");
    dc.validation_size = static_cast<std::size_t>(d.integer("validation_size", 0, 0));
    dc.train_limit = static_cast<std::size_t>(d.integer("train_limit", 0, 0));
    dc.normalize = d.boolean("normalize", true);
    if (d.has("synthetic")) {
      ObjectReader s(d.at("synthetic"), d.child("synthetic"),
                     {"classes", "samples", "channels", "height", "width", "noise", "seed", "eval_samples"});
      auto& so = dc.synthetic;
      so.classes = static_cast<std::size_t>(s.integer("classes", 10, 1));
      so.samples = static_cast<std::size_t>(s.integer("samples", 2000, 1));
      so.channels = static_cast<std::size_t>(s.integer("channels", 3, 1));
      so.height = static_cast<std::size_t>(s.integer("height", 16, 1));
      so.width = static_cast<std::size_t>(s.integer("width", 16, 1));
      so.noise = s.number("noise", so.noise);
      so.seed = static_cast<std::uint64_t>(s.integer("seed", 0, 0));
      dc.synthetic_eval_samples = static_cast<std::size_t>(s.integer("eval_samples", 0, 0));
      if (so.samples < so.classes) throw ConfigError(s.child("samples"), "must be >= classes");
    }
    if (dc.kind != DataKind::synthetic && dc.train_files.empty()) {
      throw ConfigError(d.child("train"), "CIFAR data needs at least one training file");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("malformed JSON: ") + e.what());
  }
  return parse_run_config(j);
}

LoadedData load_data(const DataConfig& cfg, const std::string& data_dir, std::uint64_t seed) {
  LoadedData out;
  if (cfg.kind == DataKind::synthetic) {
    SyntheticOptions so = cfg.synthetic;
    if (cfg.synthetic_eval_samples > 0) {
      // One draw split into train/eval keeps both from the same prototypes.
      so.samples += cfg.synthetic_eval_samples;
      const Dataset all = synthetic_classification(so);
      std::vector<std::size_t> tr(cfg.synthetic.samples), ev(cfg.synthetic_eval_samples);
      std::iota(tr.begin(), tr.end(), std::size_t{0});
      std::iota(ev.begin(), ev.end(), cfg.synthetic.samples);
      out.train = all.subset(tr);
      out.eval = all.subset(ev);
    } else {
      out.train = synthetic_classification(so);
    }
  } else {
    auto resolve = [&](const std::vector<std::string>& files) {
      std::vector<std::string> paths;
      for (const auto& f : files) {
        const std::filesystem::path p(f);
        paths.push_back(p.is_absolute() || data_dir.empty() ? p.string() : (std::filesystem::path(data_dir) / p).string());
      }
      return paths;
    };
    const CifarKind kind = cfg.kind == DataKind::cifar10 ? CifarKind::cifar10 : CifarKind::cifar100;
    out.train = load_cifar_binary(resolve(cfg.train_files), kind);
    if (!cfg.test_files.empty()) out.eval = load_cifar_binary(resolve(cfg.test_files), kind);
  }
  if (cfg.validation_size > 0) {
    Split s = validation_split(out.train, cfg.validation_size, seed);
    out.train = std::move(s.train);
    out.eval = std::move(s.validation);
  }
  if (cfg.train_limit > 0 && cfg.train_limit < out.train.size()) {
    std::vector<std::size_t> keep(cfg.train_limit);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    out.train = out.train.subset(keep);
  }
  if (cfg.normalize) {
    out.stats = channel_stats(out.train);
    normalize(out.train, *out.stats);
    if (out.eval) normalize(*out.eval, *out.stats);
  }
  return out;
}

}  // namespace seqconv
