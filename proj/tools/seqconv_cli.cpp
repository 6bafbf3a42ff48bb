// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

// seqconv: analyze | train | eval | gradcheck | export-heatmap

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "seqconv/checkpoint.hpp"
#include "seqconv/config.hpp"
#include "seqconv/errors.hpp"
#include "seqconv/network_gradcheck.hpp"
#include "seqconv/heatmap.hpp"
#include "seqconv/parallel.hpp"

namespace fs = std::filesystem;
using namespace seqconv;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, data_error = 3, numeric_error = 4 };

/// Failure while reading data; mapped to exit code 3.
struct DataFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string precision;
  std::string checkpoint;
  std::string layer = "stage*/block0/layer2";
  std::string resume;
  std::size_t coords = 6;
  std::size_t gc_size = 8;
  std::size_t gc_batch = 4;
};

RunConfig load_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("/", "--config is required");
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.precision.empty()) {
    if (o.precision == "single") {
      cfg.train.precision = Precision::single;
    } else if (o.precision == "double") {
      cfg.train.precision = Precision::double_;
    } else {
      throw ConfigError("--precision", "expected single or double");
    }
  }
  if (o.deterministic) cfg.deterministic = true;
  set_deterministic(cfg.deterministic);
  return cfg;
}

LoadedData load_data_or_fail(const RunConfig& cfg, const Options& o) {
  try {
    return load_data(cfg.data, o.data, cfg.train.seed);
  } catch (const CorruptFile& e) {
    throw DataFailure(e.what());
  } catch (const InvalidArgument& e) {
    throw DataFailure(e.what());
  }
}

fs::path out_dir(const Options& o) {
  fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const Options& o) {
  const RunConfig cfg = load_config(o);
  const ComplexityReport rep = count_params(cfg.network);
  std::printf("%s  input %zux%zu\n", cfg.network.name.c_str(), rep.height, rep.width);
  std::printf("%-8s %14s %16s\n", "stage", "params", "MACs");
  for (const auto& s : rep.stages) {
    std::printf("%-8s %14llu %16llu\n", s.name.c_str(), static_cast<unsigned long long>(s.params),
                static_cast<unsigned long long>(s.macs));
  }
  std::printf("%-8s %14llu %16llu\n", "total", static_cast<unsigned long long>(rep.total_params),
              static_cast<unsigned long long>(rep.macs));
  std::printf("params %.2fM  MACs %.2fG\n", static_cast<double>(rep.total_params) / 1e6,
              static_cast<double>(rep.macs) / 1e9);
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    nlohmann::json j = to_json(rep);
    j["name"] = cfg.network.name;
    std::ofstream(dir / "complexity.json") << j.dump(2) << "\n";
    std::ofstream(dir / "graph.txt") << graph_dump(cfg.network);
  }
  return ok;
}

template <typename T>
int train_as(const RunConfig& cfg, const Options& o) {
  LoadedData data = load_data_or_fail(cfg, o);
  Network<T> net(cfg.network);
  TrainerState<T> state = make_trainer_state(net, cfg.train);
  if (!o.resume.empty()) {
    const Checkpoint ck = read_checkpoint(o.resume);
    restore_network(net, ck);
    restore_trainer_state(net, ck, state);
    std::printf("resumed from %s at epoch %d\n", o.resume.c_str(), state.next_epoch);
  } else {
    init_weights(net, cfg.train.seed);
  }
  const fs::path dir = out_dir(o);
  const Dataset* eval = data.eval ? &*data.eval : nullptr;
  auto save = [&] {
    Checkpoint ck;
    ck.precision = cfg.train.precision;
    ck.metadata["train"] = to_json(cfg.train);
    if (data.stats) ck.metadata["channel_stats"] = {{"mean", data.stats->mean}, {"std", data.stats->std}};
    store_network(net, ck);
    store_trainer_state(net, state, ck);
    write_checkpoint((dir / "checkpoint.bin").string(), ck);
    write_history_csv((dir / "history.csv").string(), state.history);
  };
  train_loop<T>(net, data.train, eval, cfg.train, state, [&](const EpochRecord& r) {
    std::printf("epoch %3d  lr %.4g  loss %.4f  train_acc %.4f", r.epoch, r.lr, r.train_loss, r.train_acc);
    if (r.eval_err) std::printf("  eval_err %.4f", *r.eval_err);
    std::printf("\n");
    std::fflush(stdout);
    save();
  });
  save();
  return ok;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = load_config(o);
  return cfg.train.precision == Precision::single ? train_as<float>(cfg, o) : train_as<double>(cfg, o);
}

template <typename T>
int eval_as(const RunConfig& cfg, const Checkpoint& ck, const Options& o) {
  LoadedData data = load_data_or_fail(cfg, o);
  if (!data.eval) throw ConfigError("/data", "no evaluation set configured (test files, validation_size or eval_samples)");
  Network<T> net(network_spec_from_json(ck.metadata.at("network"), "/checkpoint/network"));
  restore_network(net, ck);
  const EvalResult r = evaluate(net, *data.eval, cfg.train.batch_size);
  std::printf("top1_err %.6f  top5_err %.6f  mean_loss %.6f  (%zu samples)\n", r.top1_err, r.top5_err, r.mean_loss,
              data.eval->size());
  if (!o.out.empty()) {
    nlohmann::json j = {{"top1_err", r.top1_err}, {"top5_err", r.top5_err}, {"mean_loss", r.mean_loss}};
    std::ofstream(out_dir(o) / "eval.json") << j.dump(2) << "\n";
  }
  return ok;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = load_config(o);
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint", "required for eval");
  const Checkpoint ck = read_checkpoint(o.checkpoint);
  return ck.precision == Precision::single ? eval_as<float>(cfg, ck, o) : eval_as<double>(cfg, ck, o);
}

constexpr std::uint64_t gradcheck_param_limit = 100000;

int cmd_gradcheck(const Options& o) {
  const RunConfig cfg = load_config(o);
  const std::uint64_t params = count_params(cfg.network).total_params;
  if (params > gradcheck_param_limit) {
    std::fprintf(stderr,
                 "gradcheck: refusing %s with %llu parameters; central differences need two forward passes per "
                 "probed coordinate, so the limit is %llu\n",
                 cfg.network.name.c_str(), static_cast<unsigned long long>(params),
                 static_cast<unsigned long long>(gradcheck_param_limit));
    return config_error;
  }
  NetworkGradCheckOptions opt;
  opt.batch = o.gc_batch;
  opt.size = o.gc_size;
  opt.check.max_coords_per_tensor = o.coords;
  const NetworkGradCheckReport r = network_grad_check(cfg.network, cfg.train.seed, opt);
  const GradCheckReport& rep = r.report;
  std::printf("%s: %zu coordinates over %zu tensors (%zu straddling a ReLU kink, skipped), max rel err %.3e "
              "(tol %.0e), probe point %d, ReLU margin %.1e -> %s\n",
              cfg.network.name.c_str(), rep.coords_checked, r.tensors, rep.kinks_skipped, rep.max_rel_err,
              opt.check.tol, r.draws, r.relu_margin, rep.pass ? "PASS" : "FAIL");
  if (!rep.pass) {
    std::printf("worst: %s[%zu]%s%s\n", r.worst_name.c_str(), rep.worst_index, rep.failure.empty() ? "" : "  ",
                rep.failure.c_str());
    return numeric_error;
  }
  return ok;
}

std::regex selector_regex(const std::string& selector) {
  std::string re;
  for (char c : selector) {
    if (c == '*') {
      re += "[^/]*";
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '/' || c == '_') {
      re += c;
    } else {
      re += std::string("\\") + c;
    }
  }
  return std::regex(re);
}

template <typename T>
int export_as(const Checkpoint& ck, const Options& o) {
  Network<T> net(network_spec_from_json(ck.metadata.at("network"), "/checkpoint/network"));
  restore_network(net, ck);
  const std::regex re = selector_regex(o.layer);
  std::vector<std::string> chosen;
  for (const auto& p : net.seq_layer_paths()) {
    if (std::regex_match(p, re)) chosen.push_back(p);
  }
  if (chosen.empty()) {
    std::string list;
    for (const auto& p : net.seq_layer_paths()) list += "\n  " + p;
    std::fprintf(stderr, "export-heatmap: selector '%s' matches no layer; available:%s\n", o.layer.c_str(), list.c_str());
    return config_error;
  }
  const fs::path dir = out_dir(o);
  for (const auto& path : chosen) {
    std::string file = "heatmap_" + path + ".csv";
    std::replace(file.begin(), file.end(), '/', '_');
    write_heatmap_csv((dir / file).string(), compute_heatmap(net.seq_layer(path)));
    std::printf("%s -> %s\n", path.c_str(), (dir / file).string().c_str());
  }
  return ok;
}

int cmd_export_heatmap(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint", "required for export-heatmap");
  const Checkpoint ck = read_checkpoint(o.checkpoint);
  return ck.precision == Precision::single ? export_as<float>(ck, o) : export_as<double>(ck, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SeqConv networks: complexity analysis, training, evaluation, gradient checks, heatmaps"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> seed_opts;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "run configuration (JSON)");
    if (needs_config) c->required();
    sub->add_option("--data", o.data, "directory for relative data file names");
    sub->add_option("--out", o.out, "output directory");
    seed_opts.push_back(sub->add_option("--seed", seed, "override the configured seed"));
    sub->add_flag("--deterministic", o.deterministic, "single-threaded, bitwise reproducible execution");
    sub->add_option("--precision", o.precision, "single or double")->check(CLI::IsMember({"single", "double"}));
  };
  auto* analyze = app.add_subcommand("analyze", "parameter and MAC counts");
  common(analyze, true);
  auto* train = app.add_subcommand("train", "train and write checkpoint.bin and history.csv");
  common(train, true);
  train->add_option("--resume", o.resume, "continue from a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval, true);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full network loss");
  common(gradcheck, true);
  gradcheck->add_option("--coords", o.coords, "probed coordinates per tensor (0 = all)");
  gradcheck->add_option("--size", o.gc_size, "input height and width");
  gradcheck->add_option("--batch", o.gc_batch, "input batch size")->check(CLI::Range(2, 64));
  auto* heat = app.add_subcommand("export-heatmap", "write connection heatmaps as CSV");
  common(heat, false);
  heat->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  heat->add_option("--layer", o.layer, "layer selector, '*' matches within a path segment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }
  for (const auto* opt : seed_opts)
    if (opt->count() > 0) o.seed = seed;

  try {
    if (*analyze) return cmd_analyze(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*gradcheck) return cmd_gradcheck(o);
    if (*heat) return cmd_export_heatmap(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error at %s\n", e.what());
    return config_error;
  } catch (const DataFailure& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return data_error;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return numeric_error;
  } catch (const CorruptFile& e) {
    std::fprintf(stderr, "corrupt file: %s\n", e.what());
    return data_error;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return failure;
  }
  return failure;
}
