// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/engine/config.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace semc::engine {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::defaults() {
  Config c;
  auto& v = c.values_;
  v["model.input_size"] = "128";
  v["model.in_channels"] = "1";
  v["model.stage_channels"] = "16,32,64,128";
  v["model.blocks_per_stage"] = "1";
  v["model.num_experts"] = "3";
  v["model.num_classes"] = "7";
  v["ssfm.reduction_ratio"] = "8";
  v["ssfm.spatial_kernel"] = "7";
  v["ssfm.scale_kernels"] = "1,3,5,7";
  v["ssfm.shuffle_groups"] = "0";
  v["ssfm.ace_double_norm"] = "true";
  v["mcrm.embed_dim"] = "64";
  v["mcrm.queue_capacity"] = "512";
  v["mcrm.tau_c"] = "0.07";
  v["mcrm.lambda"] = "0.5";
  v["mcrm.tau_g"] = "1.0";
  v["mcrm.gumbel_hard"] = "false";
  v["mcrm.aux_expert_ce"] = "0.0";
  v["mcrm.ema_projection"] = "false";
  v["mcrm.ema_momentum"] = "0.999";
  v["train.lr"] = "0.001";
  v["train.momentum"] = "0.9";
  v["train.weight_decay"] = "0.0001";
  v["train.clip_norm"] = "5.0";
  v["train.batch_size"] = "16";
  v["train.max_epochs"] = "200";
  v["train.seed"] = "0";
  v["train.ace_on"] = "true";
  v["train.samc_on"] = "true";
  v["train.lmc_on"] = "true";
  v["train.alpha_mode"] = "adaptive";
  v["data.manifest"] = "";
  v["data.train_frac"] = "0.70";
  v["data.val_frac"] = "0.15";
  v["augment.rotation_deg"] = "10.0";
  v["augment.hflip_prob"] = "0.5";
  v["augment.vflip_prob"] = "0.0";
  v["augment.brightness_lo"] = "0.9";
  v["augment.brightness_hi"] = "1.1";
  return c;
}

void Config::assign_known(const std::string& key, const std::string& value,
                          const std::string& origin) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError(origin + ": unknown config key '" + key + "'");
  }
  it->second = value;
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    assign_known(trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                 path + ":" + std::to_string(line_no));
  }
}

void Config::apply_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + spec + "'");
  }
  assign_known(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)), "override");
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t pos = 0;
    const long long parsed = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" + s + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + s + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: '" + s + "'");
}

std::vector<Index> Config::get_index_list(const std::string& key) const {
  const std::string s = get_string(key);
  std::vector<Index> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = trim(s.substr(start, comma - start));
    try {
      std::size_t pos = 0;
      out.push_back(Index(std::stoll(item, &pos)));
      if (pos != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer list: '" + s + "'");
    }
    start = comma + 1;
  }
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : resolved_text()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

}  // namespace semc::engine
