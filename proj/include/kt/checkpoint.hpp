// Model construction and the checkpoint container.
//
// Text layout:
//   kt-checkpoint 1
//   model <kind>
//   config <key>=<value> ...
//   vocab <count> <tag> <tag> ...
//   tensor <name> <rank> <dim>...
//   <one line of values per row>
//   ...
//   end
// Values are written in shortest round-trip form, so a reload is bit-exact.
#pragma once

#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kt/dkt.hpp"
#include "kt/dkvmn.hpp"
#include "kt/encoding.hpp"
#include "kt/mann.hpp"
#include "kt/model.hpp"

namespace kt {

/// Model dimensions exposed to users. width is d_k = d_v = d_f for DKVMN, the
/// slot width for MANN and the hidden size for DKT.
struct ModelShape {
  ModelKind kind = ModelKind::dkvmn;
  int num_exercises = 0;
  int width = 10;
  int memory_size = 5;
};

inline std::unique_ptr<KnowledgeTracer> make_model(const ModelShape& shape, double sigma, std::uint64_t seed) {
  switch (shape.kind) {
    case ModelKind::dkvmn:
      return std::make_unique<DkvmnModel>(
          DkvmnConfig::with_width(shape.num_exercises, shape.memory_size, shape.width), sigma, seed);
    case ModelKind::mann:
      return std::make_unique<MannModel>(MannConfig{shape.num_exercises, shape.memory_size, shape.width},
                                         sigma, seed);
    case ModelKind::dkt:
      return std::make_unique<DktModel>(DktConfig{shape.num_exercises, shape.width}, sigma, seed);
  }
  throw std::invalid_argument("unknown model kind");
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline double parse_double(const std::string& token) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw CheckpointError("checkpoint: bad number '" + token + "'");
  }
  return v;
}

inline long long config_value(const ConfigMap& cfg, const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end()) throw CheckpointError("checkpoint: config is missing '" + key + "'");
  return it->second;
}

}  // namespace detail

inline std::string save_checkpoint(const KnowledgeTracer& model, const Vocabulary& vocab) {
  std::string out = "kt-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += "model " + to_string(model.kind()) + "\n";
  out += "config";
  for (const auto& [k, v] : model.config()) out += " " + k + "=" + std::to_string(v);
  out += "\nvocab " + std::to_string(vocab.size());
  for (auto tag : vocab.tags()) out += " " + std::to_string(tag);
  out += "\n";
  for (const auto& p : model.params()) {
    out += "tensor " + p.name + " " + std::to_string(p.value.rank());
    for (auto d : p.value.shape()) out += " " + std::to_string(d);
    out += "\n";
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      const auto row = p.value.rank() == 1 ? p.value.values() : p.value.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out += ' ';
        detail::append_double(out, row[j]);
      }
      out += "\n";
      if (p.value.rank() == 1) break;
    }
  }
  out += "end\n";
  return out;
}

struct Checkpoint {
  std::unique_ptr<KnowledgeTracer> model;
  Vocabulary vocabulary;
};

inline Checkpoint load_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "kt-checkpoint") throw CheckpointError("not a checkpoint file");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string kind_name;
  if (!(in >> word >> kind_name) || word != "model") throw CheckpointError("checkpoint: missing model line");
  const ModelKind kind = parse_model_kind(kind_name);

  std::string line;
  std::getline(in, line);
  if (!std::getline(in, line) || line.rfind("config", 0) != 0) throw CheckpointError("checkpoint: missing config line");
  ConfigMap cfg;
  {
    std::istringstream ls(line.substr(6));
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CheckpointError("checkpoint: bad config entry '" + kv + "'");
      cfg[kv.substr(0, eq)] = std::stoll(kv.substr(eq + 1));
    }
  }

  std::size_t vocab_size = 0;
  if (!(in >> word >> vocab_size) || word != "vocab") throw CheckpointError("checkpoint: missing vocab line");
  std::vector<long long> tags(vocab_size);
  for (auto& t : tags) {
    if (!(in >> t)) throw CheckpointError("checkpoint: truncated vocab");
  }

  const auto Q = static_cast<int>(detail::config_value(cfg, "exercises"));
  std::unique_ptr<KnowledgeTracer> model;
  switch (kind) {
    case ModelKind::dkvmn:
      model = std::make_unique<DkvmnModel>(
          DkvmnConfig{Q, static_cast<int>(detail::config_value(cfg, "memory_size")),
                      static_cast<int>(detail::config_value(cfg, "key_dim")),
                      static_cast<int>(detail::config_value(cfg, "value_dim")),
                      static_cast<int>(detail::config_value(cfg, "summary_dim"))},
          1.0, 0);
      break;
    case ModelKind::mann:
      model = std::make_unique<MannModel>(
          MannConfig{Q, static_cast<int>(detail::config_value(cfg, "memory_size")),
                     static_cast<int>(detail::config_value(cfg, "slot_width"))},
          1.0, 0);
      break;
    case ModelKind::dkt:
      model = std::make_unique<DktModel>(DktConfig{Q, static_cast<int>(detail::config_value(cfg, "hidden"))}, 1.0, 0);
      break;
  }

  for (auto& p : model->params()) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> word >> name >> rank) || word != "tensor") throw CheckpointError("checkpoint: expected tensor " + p.name);
    if (name != p.name) throw CheckpointError("checkpoint: expected tensor " + p.name + ", found " + name);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) in >> d;
    if (shape != p.value.shape()) {
      throw CheckpointError("checkpoint: tensor " + name + " has shape " + shape_string(shape) +
                            ", model expects " + shape_string(p.value.shape()));
    }
    for (auto& v : p.value.values()) {
      std::string token;
      if (!(in >> token)) throw CheckpointError("checkpoint: truncated tensor " + name);
      v = detail::parse_double(token);
    }
  }
  if (!(in >> word) || word != "end") throw CheckpointError("checkpoint: missing end marker");
  return {std::move(model), Vocabulary(std::move(tags))};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace kt
