// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seqconv/errors.hpp"

namespace seqconv {

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const CheckpointTensor& Checkpoint::at(const std::string& name) const {
  const CheckpointTensor* t = find(name);
  if (t == nullptr) throw InvalidArgument("checkpoint: no tensor named '" + name + "'");
  return *t;
}

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (n > b_.size() - pos_) throw CorruptFile(std::string("checkpoint: truncated ") + what, pos_);
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(checkpoint_magic), std::end(checkpoint_magic));
  put_le<std::uint32_t>(out, checkpoint_version);
  put_le<std::uint32_t>(out, ckpt.precision == Precision::single ? 0 : 1);
  const std::string meta = ckpt.metadata.dump();
  put_le<std::uint64_t>(out, meta.size());
  out.insert(out.end(), meta.begin(), meta.end());
  put_le<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    if (shape_numel(t.shape) != t.values.size()) {
      throw InvalidArgument("checkpoint: tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                            " values for shape " + shape_to_string(t.shape));
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_le<std::uint64_t>(out, d);
    for (double v : t.values) {
      if (ckpt.precision == Precision::single) {
        put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        put_le(out, std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof checkpoint_magic, "magic") != std::string(checkpoint_magic, sizeof checkpoint_magic)) {
    throw CorruptFile("checkpoint: bad magic bytes", 0);
  }
  const std::size_t version_at = r.pos();
  const auto version = r.le<std::uint32_t>("version");
  if (version != checkpoint_version) {
    throw CorruptFile("checkpoint: unsupported version " + std::to_string(version), version_at);
  }
  const std::size_t dtype_at = r.pos();
  const auto dtype = r.le<std::uint32_t>("dtype");
  if (dtype > 1) throw CorruptFile("checkpoint: unknown dtype " + std::to_string(dtype), dtype_at);
  Checkpoint ckpt;
  ckpt.precision = dtype == 0 ? Precision::single : Precision::double_;
  const auto meta_len = r.le<std::uint64_t>("metadata length");
  const std::size_t meta_at = r.pos();
  const std::string meta = r.bytes(meta_len, "metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFile(std::string("checkpoint: metadata is not valid JSON: ") + e.what(), meta_at + e.byte);
  }
  const auto count = r.le<std::uint64_t>("tensor count");
  const std::size_t width = dtype == 0 ? 4 : 8;
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.bytes(r.le<std::uint32_t>("name length"), "name");
    const std::size_t rank_at = r.pos();
    const auto rank = r.le<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw CorruptFile("checkpoint: tensor '" + t.name + "' has rank " + std::to_string(rank), rank_at);
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t dim_at = r.pos();
      const auto dim = r.le<std::uint64_t>("shape");
      if (dim == 0 || numel > (bytes.size() / width) / dim) {
        throw CorruptFile("checkpoint: tensor '" + t.name + "' has an impossible extent", dim_at);
      }
      numel *= dim;
      t.shape.push_back(static_cast<std::size_t>(dim));
    }
    r.need(numel * width, "tensor values");
    t.values.resize(numel);
    for (auto& v : t.values) {
      v = dtype == 0 ? static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>("value")))
                     : std::bit_cast<double>(r.le<std::uint64_t>("value"));
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CorruptFile("checkpoint: trailing bytes after the last tensor", r.pos());
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("checkpoint: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("checkpoint: write to '" + path + "' failed");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("checkpoint: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

namespace {

template <typename V>
CheckpointTensor make_tensor(std::string name, Shape shape, const V& values) {
  return {std::move(name), std::move(shape), std::vector<double>(values.begin(), values.end())};
}

template <typename T>
void load_into(const CheckpointTensor& src, const Shape& shape, std::span<T> dst) {
  if (src.shape != shape) {
    throw InvalidArgument("checkpoint: tensor '" + src.name + "' has shape " + shape_to_string(src.shape) +
                          ", network expects " + shape_to_string(shape));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src.values[i]);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void set_rng_state(Rng& rng, const std::string& text) {
  std::istringstream s(text);
  s >> rng;
  if (!s) throw InvalidArgument("checkpoint: malformed generator state");
}

}  // namespace

template <typename T>
void store_network(Network<T>& net, Checkpoint& ckpt) {
  ckpt.metadata["network"] = to_json(net.spec());
  for (const auto& p : net.parameters()) {
    ckpt.tensors.push_back(make_tensor("param/" + p.name, p.tensor.shape(), p.tensor.values()));
  }
  for (const auto& s : net.batch_norm_stats()) {
    const Shape shape{s.stats->mean.size()};
    ckpt.tensors.push_back(make_tensor("bn/" + s.name + ".mean", shape, s.stats->mean));
    ckpt.tensors.push_back(make_tensor("bn/" + s.name + ".var", shape, s.stats->var));
    ckpt.tensors.push_back({"bn/" + s.name + ".populated", Shape{1}, {s.stats->populated ? 1.0 : 0.0}});
  }
}

template <typename T>
void restore_network(Network<T>& net, const Checkpoint& ckpt) {
  for (const auto& p : net.parameters()) {
    Tensor<T> t = p.tensor;
    load_into<T>(ckpt.at("param/" + p.name), t.shape(), t.values());
  }
  for (const auto& s : net.batch_norm_stats()) {
    const Shape shape{s.stats->mean.size()};
    load_into<T>(ckpt.at("bn/" + s.name + ".mean"), shape, std::span<T>(s.stats->mean));
    load_into<T>(ckpt.at("bn/" + s.name + ".var"), shape, std::span<T>(s.stats->var));
    s.stats->populated = ckpt.at("bn/" + s.name + ".populated").values.at(0) != 0.0;
  }
}

template <typename T>
void store_trainer_state(const Network<T>& net, const TrainerState<T>& state, Checkpoint& ckpt) {
  const auto params = net.parameters();
  if (state.optimizer.velocity.size() != params.size()) {
    throw InvalidArgument("checkpoint: optimizer state does not match the network");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.push_back(make_tensor("opt/" + params[i].name, params[i].tensor.shape(), state.optimizer.velocity[i]));
  }
  nlohmann::json tr;
  tr["next_epoch"] = state.next_epoch;
  tr["rng"] = rng_state(state.rng);
  tr["augment_rng"] = rng_state(state.augment_rng);
  tr["history"] = history_csv(state.history);
  ckpt.metadata["trainer"] = tr;
}

template <typename T>
void restore_trainer_state(const Network<T>& net, const Checkpoint& ckpt, TrainerState<T>& state) {
  if (!ckpt.metadata.contains("trainer")) throw InvalidArgument("checkpoint: no trainer state stored");
  const auto& tr = ckpt.metadata.at("trainer");
  const auto params = net.parameters();
  state.optimizer.velocity.clear();
  for (const auto& p : params) {
    std::vector<T> v(p.tensor.numel());
    load_into<T>(ckpt.at("opt/" + p.name), p.tensor.shape(), std::span<T>(v));
    state.optimizer.velocity.push_back(std::move(v));
  }
  state.next_epoch = tr.at("next_epoch").get<int>();
  set_rng_state(state.rng, tr.at("rng").get<std::string>());
  set_rng_state(state.augment_rng, tr.at("augment_rng").get<std::string>());
  state.history = parse_history_csv(tr.at("history").get<std::string>());
}

template void store_network(Network<float>&, Checkpoint&);
template void store_network(Network<double>&, Checkpoint&);
template void restore_network(Network<float>&, const Checkpoint&);
template void restore_network(Network<double>&, const Checkpoint&);
template void store_trainer_state(const Network<float>&, const TrainerState<float>&, Checkpoint&);
template void store_trainer_state(const Network<double>&, const TrainerState<double>&, Checkpoint&);
template void restore_trainer_state(const Network<float>&, const Checkpoint&, TrainerState<float>&);
template void restore_trainer_state(const Network<double>&, const Checkpoint&, TrainerState<double>&);

}  // namespace seqconv
