// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/engine/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace semc::engine {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), std::streamsize(n));
}

void write_u32(std::ofstream& out, std::uint32_t v) { write_bytes(out, &v, sizeof v); }
void write_u64(std::ofstream& out, std::uint64_t v) { write_bytes(out, &v, sizeof v); }

void write_string(std::ofstream& out, const std::string& s) {
  write_u32(out, std::uint32_t(s.size()));
  write_bytes(out, s.data(), s.size());
}

void write_tensor(std::ofstream& out, const std::string& name, const Tensor<float>& t) {
  write_string(out, name);
  write_u32(out, std::uint32_t(t.shape().size()));
  for (Index d : t.shape()) write_u64(out, std::uint64_t(d));
  write_bytes(out, t.data(), sizeof(float) * std::size_t(t.numel()));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), std::streamsize(n));
  if (std::size_t(in.gcount()) != n) throw CheckpointError("truncated checkpoint");
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  read_bytes(in, &v, sizeof v);
  return v;
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  read_bytes(in, &v, sizeof v);
  return v;
}

std::string read_string(std::ifstream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 20)) throw CheckpointError("corrupt checkpoint: oversized name");
  std::string s(n, '\0');
  read_bytes(in, s.data(), n);
  return s;
}

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

NamedTensor read_tensor(std::ifstream& in) {
  NamedTensor nt;
  nt.name = read_string(in);
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) throw CheckpointError("corrupt checkpoint: tensor rank " + std::to_string(rank));
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(Index(read_u64(in)));
  nt.tensor = Tensor<float>(shape);
  read_bytes(in, nt.tensor.data(), sizeof(float) * std::size_t(nt.tensor.numel()));
  return nt;
}

void restore_into(Tensor<float>& dst, const NamedTensor& src) {
  if (dst.shape() != src.tensor.shape()) {
    throw CheckpointError("checkpoint tensor '" + src.name + "' has a different shape");
  }
  dst = src.tensor;
}

}  // namespace

void save_checkpoint(const std::string& path, SemcModel<float>& model,
                     const SgdMomentum<float>* optimizer, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);

  write_bytes(out, kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u64(out, meta.config_hash);
  write_u64(out, meta.epochs_completed);

  auto params = model.parameters();
  write_u64(out, std::uint64_t(params.size()));
  for (auto& p : params) write_tensor(out, p.name, p.var.value());

  std::vector<BufferRef<float>> buffers;
  model.collect_buffers(buffers);
  write_u64(out, std::uint64_t(buffers.size()));
  for (const auto& b : buffers) write_tensor(out, b.name, *b.tensor);

  if (optimizer == nullptr) {
    write_u64(out, 0);
  } else {
    const auto& opt_params = optimizer->params();
    const auto& velocities = optimizer->velocities();
    write_u64(out, std::uint64_t(velocities.size()));
    for (std::size_t i = 0; i < velocities.size(); ++i) {
      write_tensor(out, opt_params[i].name, velocities[i]);
    }
  }

  const auto& queue = model.queue();
  const Tensor<float> rows = queue.snapshot_embeddings();
  const auto labels = queue.snapshot_labels();
  write_u64(out, std::uint64_t(rows.dim(0)));
  write_u64(out, std::uint64_t(queue.dim()));
  write_bytes(out, rows.data(), sizeof(float) * std::size_t(rows.numel()));
  for (std::int64_t label : labels) write_u64(out, std::uint64_t(label));

  write_u64(out, std::uint64_t(meta.rng_states.size()));
  for (const auto& state : meta.rng_states) {
    for (std::uint64_t word : state) write_u64(out, word);
  }

  out.flush();
  if (!out) throw IoError("failed to write checkpoint: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, SemcModel<float>& model,
                               SgdMomentum<float>* optimizer,
                               std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8] = {};
  read_bytes(in, magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }

  CheckpointMeta meta;
  meta.config_hash = read_u64(in);
  meta.epochs_completed = read_u64(in);
  if (meta.config_hash != expected_config_hash) {
    throw CheckpointError("checkpoint was produced under different settings (hash mismatch)");
  }

  auto params = model.parameters();
  std::map<std::string, Index> param_index;
  for (std::size_t i = 0; i < params.size(); ++i) param_index[params[i].name] = Index(i);

  const std::uint64_t n_params = read_u64(in);
  if (n_params != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(n_params) +
                          " parameters, model has " + std::to_string(params.size()));
  }
  std::vector<char> seen(params.size(), 0);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    NamedTensor nt = read_tensor(in);
    auto it = param_index.find(nt.name);
    if (it == param_index.end()) {
      throw CheckpointError("checkpoint parameter '" + nt.name + "' does not exist in the model");
    }
    restore_into(params[std::size_t(it->second)].var.value(), nt);
    seen[std::size_t(it->second)] = 1;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw CheckpointError("checkpoint is missing parameter '" + params[i].name + "'");
  }

  std::vector<BufferRef<float>> buffers;
  model.collect_buffers(buffers);
  std::map<std::string, Tensor<float>*> buffer_by_name;
  for (auto& b : buffers) buffer_by_name[b.name] = b.tensor;
  const std::uint64_t n_buffers = read_u64(in);
  if (n_buffers != buffers.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(n_buffers) +
                          " buffers, model has " + std::to_string(buffers.size()));
  }
  for (std::uint64_t i = 0; i < n_buffers; ++i) {
    NamedTensor nt = read_tensor(in);
    auto it = buffer_by_name.find(nt.name);
    if (it == buffer_by_name.end()) {
      throw CheckpointError("checkpoint buffer '" + nt.name + "' does not exist in the model");
    }
    restore_into(*it->second, nt);
  }

  const std::uint64_t n_velocities = read_u64(in);
  if (optimizer != nullptr && n_velocities > 0) {
    auto& velocities = optimizer->velocities();
    if (n_velocities != velocities.size()) {
      throw CheckpointError("checkpoint holds " + std::to_string(n_velocities) +
                            " velocity buffers, optimizer has " +
                            std::to_string(velocities.size()));
    }
    const auto& opt_params = optimizer->params();
    std::map<std::string, Index> vel_index;
    for (std::size_t i = 0; i < opt_params.size(); ++i) vel_index[opt_params[i].name] = Index(i);
    for (std::uint64_t i = 0; i < n_velocities; ++i) {
      NamedTensor nt = read_tensor(in);
      auto it = vel_index.find(nt.name);
      if (it == vel_index.end()) {
        throw CheckpointError("checkpoint velocity '" + nt.name + "' does not exist in the optimizer");
      }
      restore_into(velocities[std::size_t(it->second)], nt);
    }
  } else {
    for (std::uint64_t i = 0; i < n_velocities; ++i) read_tensor(in);
  }

  const Index rows = Index(read_u64(in));
  const Index dim = Index(read_u64(in));
  if (dim != model.queue().dim()) {
    throw CheckpointError("checkpoint queue dimension " + std::to_string(dim) +
                          " does not match the model's " + std::to_string(model.queue().dim()));
  }
  if (rows > model.queue().capacity()) {
    throw CheckpointError("checkpoint queue holds more rows than the model's capacity");
  }
  Tensor<float> queue_rows({rows, dim});
  read_bytes(in, queue_rows.data(), sizeof(float) * std::size_t(queue_rows.numel()));
  std::vector<std::int64_t> queue_labels(static_cast<std::size_t>(rows));
  for (auto& label : queue_labels) label = std::int64_t(read_u64(in));
  model.queue().restore(queue_rows, queue_labels);

  const std::uint64_t n_states = read_u64(in);
  if (n_states > 64) throw CheckpointError("corrupt checkpoint: rng state count");
  meta.rng_states.resize(std::size_t(n_states));
  for (auto& state : meta.rng_states) {
    for (auto& word : state) word = read_u64(in);
  }
  return meta;
}

}  // namespace semc::engine
