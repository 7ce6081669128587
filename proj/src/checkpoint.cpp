#include "g2gan/checkpoint.hpp"

#include <json.hpp>

#include "g2gan/error.hpp"

namespace g2gan {

namespace fs = std::filesystem;
using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

void write_meta(OutputArchive& archive, const CheckpointMeta& meta) {
  nlohmann::json doc;
  doc["config"] = meta.config_text;
  doc["epoch"] = meta.epoch;
  doc["iteration"] = meta.iteration;
  doc["rng_state"] = meta.rng_state;
  doc["sharing_mode"] = to_string(meta.sharing_mode);
  doc["domain_names"] = meta.domain_names;
  archive.write("meta", c10::IValue(doc.dump()));
}

CheckpointMeta read_meta(InputArchive& archive) {
  c10::IValue value;
  if (!archive.try_read("meta", value) || !value.isString()) {
    throw IoError("checkpoint has no metadata record");
  }
  try {
    const auto doc = nlohmann::json::parse(value.toStringRef());
    CheckpointMeta meta;
    meta.config_text = doc.at("config").get<std::string>();
    meta.epoch = doc.at("epoch").get<std::int64_t>();
    meta.iteration = doc.at("iteration").get<std::int64_t>();
    meta.rng_state = doc.at("rng_state").get<std::string>();
    meta.sharing_mode = parse_sharing_mode(doc.at("sharing_mode").get<std::string>());
    meta.domain_names = doc.at("domain_names").get<std::vector<std::string>>();
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

namespace {

void copy_into(torch::Tensor& target, const torch::Tensor& source, const std::string& name) {
  if (source.sizes() != target.sizes()) {
    throw IoError("checkpoint array " + name + " has shape " + c10::str(source.sizes()) + ", expected " +
                  c10::str(target.sizes()));
  }
  torch::NoGradGuard no_grad;
  target.copy_(source);
}

std::string alternate_name(const std::string& name) {
  static const std::pair<std::string, std::string> swaps[] = {
      {"translator.encoder.", "shared.encoder."},
      {"reconstructor.encoder.", "shared.encoder."},
      {"translator.decoder.", "shared.decoder."},
      {"reconstructor.decoder.", "shared.decoder."},
  };
  for (const auto& [own, shared] : swaps) {
    if (name.rfind(own, 0) == 0) {
      return shared + name.substr(own.size());
    }
  }
  if (name.rfind("shared.", 0) == 0) {
    return "translator." + name.substr(7);
  }
  return {};
}

}  // namespace

void write_generator_params(OutputArchive& archive, const GeneratorPair& pair) {
  for (const auto& [name, tensor] : pair.named_parameters()) {
    archive.write("params/" + name, tensor.detach());
  }
}

void read_generator_params(InputArchive& archive, GeneratorPair& pair) {
  for (auto& [name, tensor] : pair.named_parameters()) {
    torch::Tensor stored;
    if (archive.try_read("params/" + name, stored)) {
      copy_into(tensor, stored.to(tensor.scalar_type()), name);
      continue;
    }
    const auto alt = alternate_name(name);
    if (!alt.empty() && archive.try_read("params/" + alt, stored)) {
      copy_into(tensor, stored.to(tensor.scalar_type()), name);
      continue;
    }
    throw IoError("checkpoint lacks generator array " + name);
  }
}

void write_module_params(OutputArchive& archive, const std::string& prefix, const torch::nn::Module& net) {
  for (const auto& item : net.named_parameters(true)) {
    archive.write("params/" + prefix + "." + item.key(), item.value().detach());
  }
}

void read_module_params(InputArchive& archive, const std::string& prefix, torch::nn::Module& net) {
  for (auto& item : net.named_parameters(true)) {
    const auto key = prefix + "." + item.key();
    torch::Tensor stored;
    if (!archive.try_read("params/" + key, stored)) {
      throw IoError("checkpoint lacks array " + key);
    }
    copy_into(item.value(), stored.to(item.value().scalar_type()), key);
  }
}

void save_archive(OutputArchive& archive, const fs::path& path) {
  const auto tmp = fs::path(path.string() + ".tmp");
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at " + path.string());
  }
}

InputArchive load_archive(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw IoError("checkpoint " + path.string() + " does not exist");
  }
  InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

}  // namespace g2gan
