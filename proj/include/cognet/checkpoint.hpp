#pragma once

#include "cognet/med_graph.hpp"
#include "cognet/model.hpp"
#include "cognet/train.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace cognet {

// params.bin layout: "COGNETP1", u64 little-endian header length, JSON header
// (model config, dims, ablations, tensor table), then raw float64 values of
// every tensor in column-major order.
void save_parameters(const std::filesystem::path& file, const CognetModel& model);
CognetModel load_parameters(const std::filesystem::path& file);

struct Checkpoint {
  CognetModel model;
  TrainConfig train_config;
  MedGraphPair graphs;
  std::uint64_t med_vocab_hash = 0;
};

// Directory with params.bin, train_config.json, ehr_graph.adj, ddi_graph.adj.
void save_checkpoint(const std::filesystem::path& dir, const CognetModel& model,
                     const TrainConfig& config, const MedGraphPair& graphs,
                     std::uint64_t med_vocab_hash);
// Throws ValidationError when the directory or any file is missing or corrupt.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace cognet
