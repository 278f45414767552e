#include "cognet/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace cognet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'G', 'N', 'E', 'T', 'P', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

json config_to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},       {"heads", c.heads},
          {"gate_hidden", c.gate_hidden},   {"max_len", c.max_len},
          {"beam_width", c.beam_width},     {"encoder_layers", c.encoder_layers},
          {"layer_norm_eps", c.layer_norm_eps}, {"dropout", c.dropout},
          {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.heads = j.value("heads", c.heads);
  c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
  c.max_len = j.value("max_len", c.max_len);
  c.beam_width = j.value("beam_width", c.beam_width);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.dropout = j.value("dropout", c.dropout);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.validate();
  return c;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return config_to_json(config).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad model config JSON: ") + e.what());
  }
}

void save_parameters(const fs::path& file, const CognetModel& model) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
                       {"offset", offset}});
    offset += static_cast<std::size_t>(p.value.size());
  }
  const json header = {
      {"config", config_to_json(model.config())},
      {"dims",
       {{"diagnoses", model.dims().num_diagnoses},
        {"procedures", model.dims().num_procedures},
        {"medications", model.dims().num_meds}}},
      {"ablations", to_string(model.ablations())},
      {"tensors", tensors},
  };
  const std::string h = header.dump();
  std::string blob(kMagic, sizeof kMagic);
  const std::uint64_t len = h.size();
  blob.append(reinterpret_cast<const char*>(&len), sizeof len);
  blob += h;
  for (const auto& p : model.params()) {
    blob.append(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  write_file_atomic(file, blob);
}

CognetModel load_parameters(const fs::path& file) {
  if (!fs::exists(file)) throw ValidationError("missing parameter file: " + file.string());
  const std::string blob = read_text_file(file);
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError("not a parameter file: " + file.string());
  }
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + 8, sizeof len);
  if (16 + len > blob.size()) throw ValidationError("truncated parameter header");
  json header;
  try {
    header = json::parse(blob.substr(16, len));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt parameter header: ") + e.what());
  }
  const ModelConfig config = config_from_json(header.at("config"));
  const auto& d = header.at("dims");
  const ModelDims dims{d.at("diagnoses").get<int>(), d.at("procedures").get<int>(),
                       d.at("medications").get<int>()};
  CognetModel model(config, dims, parse_ablations(header.at("ablations").get<std::string>()));

  const char* data = blob.data() + 16 + len;
  const std::size_t avail = blob.size() - 16 - len;
  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.params().size()) {
    throw ValidationError("parameter count mismatch in " + file.string());
  }
  for (const auto& t : tensors) {
    auto* p = model.params().find(t.at("name").get<std::string>());
    if (!p) throw ValidationError("unknown tensor " + t.at("name").get<std::string>());
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ValidationError("shape mismatch for tensor " + p->name);
    }
    const auto off = t.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if ((off * sizeof(double)) + bytes > avail) throw ValidationError("truncated parameter data");
    std::memcpy(p->value.data(), data + off * sizeof(double), bytes);
  }
  return model;
}

void save_checkpoint(const fs::path& dir, const CognetModel& model, const TrainConfig& config,
                     const MedGraphPair& graphs, std::uint64_t med_vocab_hash) {
  fs::create_directories(dir);
  save_parameters(dir / "params.bin", model);
  json cfg = json::parse(config.to_json());
  cfg["med_vocab_hash"] = hex64(med_vocab_hash);
  cfg["model"] = config_to_json(model.config());
  write_file_atomic(dir / "train_config.json", cfg.dump(2) + "\n");
  write_adjacency(dir / "ehr_graph.adj", graphs.ehr, med_vocab_hash);
  write_adjacency(dir / "ddi_graph.adj", graphs.ddi, med_vocab_hash);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("checkpoint directory not found: " + dir.string());
  for (const char* f : {"params.bin", "train_config.json", "ehr_graph.adj", "ddi_graph.adj"}) {
    if (!fs::exists(dir / f)) throw ValidationError("checkpoint is missing " + std::string(f));
  }
  CognetModel model = load_parameters(dir / "params.bin");
  const std::string text = read_text_file(dir / "train_config.json");
  TrainConfig tc = TrainConfig::from_json(text);
  std::uint64_t hash = 0;
  try {
    hash = std::stoull(json::parse(text).at("med_vocab_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("checkpoint vocab hash unreadable: ") + e.what());
  }
  std::uint64_t h_ehr = 0, h_ddi = 0;
  MedGraphPair graphs{read_adjacency(dir / "ehr_graph.adj", &h_ehr),
                      read_adjacency(dir / "ddi_graph.adj", &h_ddi)};
  if (h_ehr != hash || h_ddi != hash) throw ValidationError("checkpoint graph vocab hash mismatch");
  return Checkpoint{std::move(model), tc, std::move(graphs), hash};
}

}  // namespace cognet
