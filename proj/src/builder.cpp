// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/builder.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json_reader.hpp"
#include "seqconv/errors.hpp"

namespace seqconv {

namespace {

std::string stage_name(std::size_t stage) { return "stage" + std::to_string(stage + 1); }

std::size_t conv_out(std::size_t in, std::size_t kernel, int stride) {
  const std::size_t pad = kernel / 2;
  return (in + 2 * pad - kernel) / static_cast<std::size_t>(stride) + 1;
}

void split_params(const SeqConvConfig& cfg, std::size_t in_width, LayerInfo& row) {
  for (const auto& p : param_shapes(cfg, in_width)) {
    const bool kernel = p.role.ends_with(".kernel");
    (kernel ? row.conv_params : row.bn_params) += shape_numel(p.shape);
  }
}

LayerInfo seq_row(std::string path, std::string stage, const SeqConvConfig& cfg, std::size_t in_width,
                  std::size_t h, std::size_t w) {
  LayerInfo row;
  row.path = std::move(path);
  row.stage = std::move(stage);
  row.kind = "seqconv";
  row.in_channels = in_width;
  row.out_channels = static_cast<std::size_t>(cfg.output_width());
  row.in_h = row.out_h = h;
  row.in_w = row.out_w = w;
  row.kernel = 3;
  row.seq = cfg;
  if (cfg.aggregation == Aggregation::windowed) row.window = effective_window(cfg, in_width);
  split_params(cfg, in_width, row);
  row.macs = layer_macs(cfg, in_width, h, w);
  return row;
}

LayerInfo conv_row(std::string path, std::string stage, std::string kind, std::size_t in, std::size_t out,
                   std::size_t kernel, int stride, int groups, std::size_t h, std::size_t w) {
  LayerInfo row;
  row.path = std::move(path);
  row.stage = std::move(stage);
  row.kind = std::move(kind);
  row.in_channels = in;
  row.out_channels = out;
  row.kernel = kernel;
  row.stride = stride;
  row.conv_groups = groups;
  row.in_h = h;
  row.in_w = w;
  row.out_h = conv_out(h, kernel, stride);
  row.out_w = conv_out(w, kernel, stride);
  const auto g = static_cast<std::size_t>(groups);
  row.conv_params = out * (in / g) * kernel * kernel;
  row.bn_params = 2 * out;
  row.macs = static_cast<std::uint64_t>(row.out_h) * row.out_w * out * (in / g) * kernel * kernel;
  return row;
}

void plan_stage(const NetworkSpec& spec, std::size_t s, std::size_t& c, std::size_t& h, std::size_t& w,
                std::vector<LayerInfo>& rows) {
  const StageSpec& st = spec.stages[s];
  const std::string name = stage_name(s);
  if (st.width == 0) throw InvalidArgument("width must be positive");
  if (st.blocks < 0) throw InvalidArgument("block count N must be >= 0");
  switch (st.entry.kind) {
    case EntryKind::none:
      if (c != st.width) {
        throw InvalidArgument("no entry layer but incoming width " + std::to_string(c) + " differs from stage width " +
                              std::to_string(st.width));
      }
      break;
    case EntryKind::layer: {
      const SeqConvConfig cfg = entry_layer_config(spec, s, c);
      rows.push_back(seq_row(name + "/entry", name, cfg, c, h, w));
      c = st.width;
      break;
    }
    case EntryKind::downsample: {
      const DownsampleBlockSpec ds = downsample_spec(spec, s, c);
      rows.push_back(seq_row(name + "/downsample/extension", name, ds.extension, c, h, w));
      const std::size_t out = ds.out_width();
      rows.push_back(conv_row(name + "/downsample/downsize", name, "downsize", out, out, 3, 2, ds.downsize_groups, h, w));
      h = rows.back().out_h;
      w = rows.back().out_w;
      c = out;
      break;
    }
  }
  if (st.blocks > 0) {
    const ResidualBlockSpec rb = residual_block_spec(spec, s);
    for (int b = 0; b < st.blocks; ++b) {
      const std::string prefix = name + "/block" + std::to_string(b);
      rows.push_back(seq_row(prefix + "/layer1", name, rb.layer1, c, h, w));
      rows.push_back(seq_row(prefix + "/layer2", name, rb.layer2, c, h, w));
    }
  }
}

}  // namespace

NetworkSpec build_cifar_template(int k, int r, std::array<int, 3> blocks, CifarVariant variant, std::size_t classes,
                                 Aggregation aggregation) {
  if (k < 1 || r < 1) throw InvalidArgument("cifar template: k and r must be >= 1");
  NetworkSpec spec;
  std::ostringstream name;
  name << "SeqResNet-k" << k << "-r" << r << "-N" << blocks[0];
  if (blocks[1] != blocks[0] || blocks[2] != blocks[0]) name << "," << blocks[1] << "," << blocks[2];
  name << (variant == CifarVariant::basic ? "-basic" : "-bottleneck");
  if (aggregation == Aggregation::dense) name << "-dense";
  spec.name = name.str();
  spec.transform = variant == CifarVariant::basic ? Transform::basic : Transform::bottleneck;
  spec.stem = {StemLayer{16, 3, 1}};
  const auto ur = static_cast<std::size_t>(r);
  for (std::size_t s = 0; s < 3; ++s) {
    StageSpec st;
    st.width = 16 * ur * (s + 1);
    if (st.width % static_cast<std::size_t>(k) != 0) {
      throw InvalidArgument("cifar template: " + stage_name(s) + " width " + std::to_string(st.width) +
                            " (16r x " + std::to_string(s + 1) + ") not divisible by k=" + std::to_string(k));
    }
    st.growth = k;
    st.blocks = blocks[s];
    st.aggregation = aggregation;
    st.entry.growth = k;
    if (s == 0) {
      st.entry.kind = EntryKind::layer;
      st.entry.aggregation = Aggregation::dense;
    } else {
      st.entry.kind = EntryKind::downsample;
      st.entry.aggregation = aggregation;
      st.entry.downsize_groups = static_cast<int>(st.width / static_cast<std::size_t>(k));
    }
    spec.stages.push_back(st);
  }
  spec.head_width = 48 * ur;
  spec.classes = classes;
  validate(spec);
  return spec;
}

std::vector<std::string> imagenet_template_names() { return {"SeqResNeXt-24", "SeqResNet-B42", "SeqResNet-B22"}; }

NetworkSpec build_imagenet_template(const std::string& name) {
  struct Row {
    std::size_t width;
    int k, c, n;
    int ext_k, ext_c, downsize_groups;
  };
  std::vector<Row> rows;
  Transform transform = Transform::bottleneck;
  std::size_t head = 0;
  if (name == "SeqResNeXt-24") {
    rows = {{256, 32, 8, 1, 32, 8, 64}, {512, 64, 8, 1, 32, 8, 64}, {1024, 64, 4, 3, 64, 8, 64},
            {2048, 128, 4, 1, 64, 4, 64}};
    head = 2048;
  } else if (name == "SeqResNet-B42" || name == "SeqResNet-B22") {
    const bool deep = name == "SeqResNet-B42";
    rows = {{128, 32, 1, deep ? 3 : 1, 32, 1, 4},
            {256, 64, 1, deep ? 4 : 1, 32, 1, 4},
            {512, 64, 1, deep ? 5 : 2, 64, 1, 8},
            {1024, 128, 1, deep ? 3 : 1, 64, 1, 8}};
    head = 1024;
  } else {
    std::string list;
    for (const auto& n : imagenet_template_names()) list += (list.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown ImageNet template '" + name + "' (available: " + list + ")");
  }
  NetworkSpec spec;
  spec.name = name;
  spec.input_height = spec.input_width = 224;
  spec.transform = transform;
  spec.stem = {StemLayer{32, 3, 2}, StemLayer{32, 3, 1}};
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const Row& r = rows[s];
    StageSpec st;
    st.width = r.width;
    st.growth = r.k;
    st.subgroups = r.c;
    st.blocks = r.n;
    st.entry.kind = EntryKind::downsample;
    st.entry.aggregation = s == 0 ? Aggregation::dense : Aggregation::windowed;
    st.entry.growth = r.ext_k;
    st.entry.subgroups = r.ext_c;
    st.entry.downsize_groups = r.downsize_groups;
    spec.stages.push_back(st);
  }
  spec.head_width = head;
  spec.classes = 1000;
  validate(spec);
  return spec;
}

SeqConvConfig entry_layer_config(const NetworkSpec& spec, std::size_t stage, std::size_t in_width) {
  const StageSpec& st = spec.stages.at(stage);
  const EntrySpec& e = st.entry;
  if (e.growth < 1 || st.width % static_cast<std::size_t>(e.growth) != 0) {
    throw InvalidArgument("entry layer: width " + std::to_string(st.width) + " not divisible by k=" +
                          std::to_string(e.growth));
  }
  SeqConvConfig cfg;
  cfg.groups = static_cast<int>(st.width / static_cast<std::size_t>(e.growth));
  cfg.growth = e.growth;
  cfg.aggregation = e.aggregation;
  cfg.transform = spec.transform;
  cfg.subgroups = e.subgroups;
  validate(cfg, in_width);
  return cfg;
}

DownsampleBlockSpec downsample_spec(const NetworkSpec& spec, std::size_t stage, std::size_t in_width) {
  const StageSpec& st = spec.stages.at(stage);
  const EntrySpec& e = st.entry;
  if (st.width <= in_width) {
    throw InvalidArgument("downsample entry: stage width " + std::to_string(st.width) +
                          " must exceed the incoming width " + std::to_string(in_width));
  }
  const std::size_t added = st.width - in_width;
  if (e.growth < 1 || added % static_cast<std::size_t>(e.growth) != 0) {
    throw InvalidArgument("downsample entry: added width " + std::to_string(added) + " not divisible by k=" +
                          std::to_string(e.growth));
  }
  DownsampleBlockSpec ds;
  ds.in_width = in_width;
  ds.extension.groups = static_cast<int>(added / static_cast<std::size_t>(e.growth));
  ds.extension.growth = e.growth;
  ds.extension.aggregation = e.aggregation;
  ds.extension.transform = spec.transform;
  ds.extension.subgroups = e.subgroups;
  ds.downsize_groups = e.downsize_groups;
  ds.validate();
  return ds;
}

ResidualBlockSpec residual_block_spec(const NetworkSpec& spec, std::size_t stage) {
  const StageSpec& st = spec.stages.at(stage);
  ResidualBlockSpec rb = ResidualBlockSpec::make(st.width, st.growth, st.subgroups, spec.transform, st.aggregation);
  rb.validate();
  return rb;
}

void validate(const NetworkSpec& spec) { (void)layer_plan(spec); }

std::vector<LayerInfo> layer_plan(const NetworkSpec& spec) {
  return layer_plan(spec, spec.input_height, spec.input_width);
}

std::vector<LayerInfo> layer_plan(const NetworkSpec& spec, std::size_t height, std::size_t width) {
  if (spec.in_channels == 0 || height == 0 || width == 0) {
    throw InvalidArgument("network: input channels and spatial size must be positive");
  }
  if (spec.stem.empty()) throw InvalidArgument("network: at least one stem conv is required");
  if (spec.stages.empty()) throw InvalidArgument("network: at least one stage is required");
  if (spec.classes == 0) throw InvalidArgument("network: classes must be >= 1");
  std::vector<LayerInfo> rows;
  std::size_t c = spec.in_channels, h = height, w = width;
  for (std::size_t i = 0; i < spec.stem.size(); ++i) {
    const StemLayer& l = spec.stem[i];
    if (l.out_channels == 0 || l.kernel == 0 || l.kernel % 2 == 0 || l.stride < 1) {
      throw InvalidArgument("network: stem conv " + std::to_string(i) + " needs positive width, odd kernel, stride >= 1");
    }
    rows.push_back(conv_row("stem/conv" + std::to_string(i), "stem", "conv", c, l.out_channels, l.kernel, l.stride, 1, h, w));
    c = l.out_channels;
    h = rows.back().out_h;
    w = rows.back().out_w;
  }
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    try {
      plan_stage(spec, s, c, h, w, rows);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("network: " + stage_name(s) + ": " + e.what());
    }
  }
  if (spec.head_width > 0) {
    rows.push_back(conv_row("head/conv1x1", "head", "conv", c, spec.head_width, 1, 1, 1, h, w));
    c = spec.head_width;
  }
  LayerInfo fc;
  fc.path = "head/fc";
  fc.stage = "head";
  fc.kind = "fc";
  fc.in_channels = c;
  fc.out_channels = spec.classes;
  fc.in_h = h;
  fc.in_w = w;
  fc.out_h = fc.out_w = 1;
  fc.fc_params = c * spec.classes + spec.classes;
  fc.macs = c * spec.classes;
  rows.push_back(fc);
  return rows;
}

ComplexityReport count_params(const NetworkSpec& spec) {
  ComplexityReport rep;
  rep.height = spec.input_height;
  rep.width = spec.input_width;
  for (const LayerInfo& row : layer_plan(spec)) {
    rep.conv_params += row.conv_params;
    rep.bn_params += row.bn_params;
    rep.fc_params += row.fc_params;
    rep.macs += row.macs;
    if (rep.stages.empty() || rep.stages.back().name != row.stage) rep.stages.push_back({row.stage, 0, 0});
    rep.stages.back().params += row.conv_params + row.bn_params + row.fc_params;
    rep.stages.back().macs += row.macs;
  }
  rep.total_params = rep.conv_params + rep.bn_params + rep.fc_params;
  return rep;
}

std::uint64_t count_macs(const NetworkSpec& spec, std::size_t height, std::size_t width) {
  std::uint64_t macs = 0;
  for (const LayerInfo& row : layer_plan(spec, height, width)) macs += row.macs;
  return macs;
}

std::string graph_dump(const NetworkSpec& spec) {
  const auto rows = layer_plan(spec);
  std::ostringstream out;
  out << "network " << spec.name << " input " << spec.in_channels << "x" << spec.input_height << "x"
      << spec.input_width << " transform " << to_string(spec.transform) << " classes " << spec.classes << "\n";
  char buf[256];
  for (const LayerInfo& r : rows) {
    std::string desc;
    if (r.kind == "seqconv") {
      const bool dense = r.seq.aggregation == Aggregation::dense;
      desc = std::string(dense ? "seqconv[red*]" : "wseqconv[blue*]") + " g=" + std::to_string(r.seq.groups) +
             " k=" + std::to_string(r.seq.growth);
      if (!dense) desc += " g'=" + std::to_string(r.window);
      if (r.seq.subgroups > 1) desc += " c=" + std::to_string(r.seq.subgroups);
      if (!r.seq.final_activation) desc += " linear-out";
    } else if (r.kind == "fc") {
      desc = "fc";
    } else {
      desc = "conv" + std::to_string(r.kernel) + "x" + std::to_string(r.kernel) + "/s" + std::to_string(r.stride);
      if (r.conv_groups > 1) desc += " groups=" + std::to_string(r.conv_groups);
    }
    std::snprintf(buf, sizeof buf, "%-30s %-36s %5zu -> %-5zu %4zux%-4zu params=%llu macs=%llu\n", r.path.c_str(),
                  desc.c_str(), r.in_channels, r.out_channels, r.out_h, r.out_w,
                  static_cast<unsigned long long>(r.conv_params + r.bn_params + r.fc_params),
                  static_cast<unsigned long long>(r.macs));
    out << buf;
  }
  const ComplexityReport rep = count_params(spec);
  out << "total params=" << rep.total_params << " macs=" << rep.macs << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

const char* to_string(EntryKind k) {
  switch (k) {
    case EntryKind::none:
      return "none";
    case EntryKind::layer:
      return "layer";
    case EntryKind::downsample:
      return "downsample";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& path, const std::string& s) {
  return detail::parse_enum<Aggregation>(path, s, {{"dense", Aggregation::dense}, {"windowed", Aggregation::windowed}});
}

}  // namespace

json to_json(const NetworkSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["input"] = {{"channels", spec.in_channels}, {"height", spec.input_height}, {"width", spec.input_width}};
  j["transform"] = to_string(spec.transform);
  j["stem"] = json::array();
  for (const auto& l : spec.stem) {
    j["stem"].push_back({{"out_channels", l.out_channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  }
  j["stages"] = json::array();
  for (const auto& st : spec.stages) {
    json e = {{"kind", to_string(st.entry.kind)}};
    if (st.entry.kind != EntryKind::none) {
      e["aggregation"] = to_string(st.entry.aggregation);
      e["growth"] = st.entry.growth;
      e["subgroups"] = st.entry.subgroups;
    }
    if (st.entry.kind == EntryKind::downsample) e["downsize_groups"] = st.entry.downsize_groups;
    j["stages"].push_back({{"width", st.width},
                           {"growth", st.growth},
                           {"subgroups", st.subgroups},
                           {"blocks", st.blocks},
                           {"aggregation", to_string(st.aggregation)},
                           {"entry", e}});
  }
  j["head_width"] = spec.head_width;
  j["classes"] = spec.classes;
  return j;
}

NetworkSpec network_spec_from_json(const json& j, const std::string& path) {
  using detail::ObjectReader;
  ObjectReader r(j, path, {"name", "input", "transform", "stem", "stages", "head_width", "classes"});
  NetworkSpec spec;
  spec.name = r.string("name", "custom");
  if (r.has("input")) {
    ObjectReader in(r.at("input"), r.child("input"), {"channels", "height", "width"});
    spec.in_channels = static_cast<std::size_t>(in.integer("channels", 3, 1));
    spec.input_height = static_cast<std::size_t>(in.integer("height", 32, 1));
    spec.input_width = static_cast<std::size_t>(in.integer("width", 32, 1));
  }
  spec.transform = detail::parse_enum<Transform>(r.child("transform"), r.string("transform", "basic"),
                                                 {{"basic", Transform::basic}, {"bottleneck", Transform::bottleneck}});
  const json& stem = r.at("stem");
  if (!stem.is_array()) throw ConfigError(r.child("stem"), "expected an array");
  for (std::size_t i = 0; i < stem.size(); ++i) {
    ObjectReader l(stem[i], r.child("stem") + "/" + std::to_string(i), {"out_channels", "kernel", "stride"});
    spec.stem.push_back({static_cast<std::size_t>(l.integer("out_channels", 16, 1)),
                         static_cast<std::size_t>(l.integer("kernel", 3, 1)), static_cast<int>(l.integer("stride", 1, 1))});
  }
  const json& stages = r.at("stages");
  if (!stages.is_array()) throw ConfigError(r.child("stages"), "expected an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string sp = r.child("stages") + "/" + std::to_string(i);
    ObjectReader s(stages[i], sp, {"width", "growth", "subgroups", "blocks", "aggregation", "entry"});
    StageSpec st;
    st.width = static_cast<std::size_t>(ObjectReader::integer_value(s.at("width"), s.child("width"), 1));
    st.growth = static_cast<int>(ObjectReader::integer_value(s.at("growth"), s.child("growth"), 1));
    st.subgroups = static_cast<int>(s.integer("subgroups", 1, 1));
    st.blocks = static_cast<int>(s.integer("blocks", 1, 0));
    st.aggregation = parse_aggregation(s.child("aggregation"), s.string("aggregation", "windowed"));
    if (s.has("entry")) {
      ObjectReader e(s.at("entry"), s.child("entry"), {"kind", "aggregation", "growth", "subgroups", "downsize_groups"});
      st.entry.kind = detail::parse_enum<EntryKind>(
          e.child("kind"), e.string("kind", "none"),
          {{"none", EntryKind::none}, {"layer", EntryKind::layer}, {"downsample", EntryKind::downsample}});
      if (st.entry.kind != EntryKind::none) {
        st.entry.aggregation = parse_aggregation(e.child("aggregation"), e.string("aggregation", "windowed"));
        st.entry.growth = static_cast<int>(e.integer("growth", st.growth, 1));
        st.entry.subgroups = static_cast<int>(e.integer("subgroups", 1, 1));
      }
      if (st.entry.kind == EntryKind::downsample) {
        st.entry.downsize_groups = static_cast<int>(e.integer("downsize_groups", 1, 1));
      } else if (e.has("downsize_groups")) {
        throw ConfigError(e.child("downsize_groups"), "only a downsample entry has downsize groups");
      }
    }
    spec.stages.push_back(st);
  }
  spec.head_width = static_cast<std::size_t>(r.integer("head_width", 0, 0));
  spec.classes = static_cast<std::size_t>(r.integer("classes", 10, 1));
  try {
    validate(spec);
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.empty() ? "/" : path, e.what());
  }
  return spec;
}

json to_json(const ComplexityReport& rep) {
  json j;
  j["params"] = rep.total_params;
  j["conv_params"] = rep.conv_params;
  j["bn_params"] = rep.bn_params;
  j["fc_params"] = rep.fc_params;
  j["macs"] = rep.macs;
  j["input"] = {rep.height, rep.width};
  j["stages"] = json::array();
  for (const auto& s : rep.stages) j["stages"].push_back({{"name", s.name}, {"params", s.params}, {"macs", s.macs}});
  return j;
}

}  // namespace seqconv
