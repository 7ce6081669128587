#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "g2gan/networks.hpp"

namespace g2gan {

// Metadata record stored beside the parameter arrays.
struct CheckpointMeta {
  std::string config_text;  // flat key = value run config
  std::int64_t epoch = 0;
  std::int64_t iteration = 0;
  std::string rng_state;
  SharingMode sharing_mode = SharingMode::None;
  std::vector<std::string> domain_names;
};

void write_meta(torch::serialize::OutputArchive& archive, const CheckpointMeta& meta);
// Throws IoError when the record is missing or malformed.
CheckpointMeta read_meta(torch::serialize::InputArchive& archive);

// Parameters are stored as "params/<name>" with the names of
// GeneratorPair::named_parameters.
void write_generator_params(torch::serialize::OutputArchive& archive, const GeneratorPair& pair);

// Loads into `pair`. A "translator.encoder.*" slot falls back to
// "shared.encoder.*" and vice versa, so checkpoints from a sharing run can seed
// a run without sharing. Throws IoError on a missing or mis-shaped array.
void read_generator_params(torch::serialize::InputArchive& archive, GeneratorPair& pair);

// "params/<prefix>.<name>" for every parameter of `net`.
void write_module_params(torch::serialize::OutputArchive& archive, const std::string& prefix,
                         const torch::nn::Module& net);
void read_module_params(torch::serialize::InputArchive& archive, const std::string& prefix, torch::nn::Module& net);

// Saves to `path` through a temporary file and a rename, so an existing file
// survives a failed write. Throws IoError.
void save_archive(torch::serialize::OutputArchive& archive, const std::filesystem::path& path);
// Throws IoError when the file is missing or unreadable.
torch::serialize::InputArchive load_archive(const std::filesystem::path& path);

}  // namespace g2gan
