#include "sthyper/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>

#include <torch/torch.h>

#include <json.hpp>

#include "sthyper/errors.hpp"

namespace sthyper {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

using nlohmann::json;

std::string dtype_name(const torch::Tensor& t) {
  if (t.scalar_type() == torch::kFloat64) return "float64";
  if (t.scalar_type() == torch::kInt64) return "int64";
  throw IoError("checkpoint: unsupported dtype " + std::string(c10::toString(t.scalar_type())));
}

torch::Dtype dtype_from_name(const std::string& name) {
  if (name == "float64") return torch::kFloat64;
  if (name == "int64") return torch::kInt64;
  throw IoError("checkpoint: unsupported dtype " + name);
}

void write_tensors(const NamedTensors& tensors, const std::string& group, std::ofstream& blob, json& manifest,
                   std::int64_t& offset) {
  for (const auto& [name, tensor] : tensors) {
    const auto t = tensor.detach().contiguous();
    const auto nbytes = static_cast<std::int64_t>(t.numel() * t.element_size());
    blob.write(static_cast<const char*>(t.data_ptr()), nbytes);
    manifest.push_back({{"name", name},
                        {"group", group},
                        {"shape", t.sizes().vec()},
                        {"dtype", dtype_name(t)},
                        {"offset", offset},
                        {"nbytes", nbytes}});
    offset += nbytes;
  }
}

}  // namespace

NamedTensors snapshot_state(const StHyper& model) {
  torch::NoGradGuard guard;
  NamedTensors out;
  for (const auto& item : model->named_parameters()) {
    out.emplace_back(item.key(), item.value().detach().clone());
  }
  for (const auto& item : model->named_buffers()) {
    out.emplace_back(item.key(), item.value().detach().clone());
  }
  return out;
}

NamedTensors snapshot_optimizer(const StHyper& model, torch::optim::Adam& optimizer) {
  NamedTensors out;
  auto& state = optimizer.state();
  for (const auto& item : model->named_parameters()) {
    auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    out.emplace_back(item.key() + "/exp_avg", s.exp_avg().detach().clone());
    out.emplace_back(item.key() + "/exp_avg_sq", s.exp_avg_sq().detach().clone());
    out.emplace_back(item.key() + "/step", torch::tensor({s.step()}, torch::kInt64));
  }
  return out;
}

void restore_state(StHyper& model, const NamedTensors& state) {
  torch::NoGradGuard guard;
  std::map<std::string, const torch::Tensor*> lookup;
  for (const auto& [name, t] : state) lookup[name] = &t;
  for (auto& item : model->named_parameters()) {
    auto it = lookup.find(item.key());
    if (it == lookup.end()) {
      throw IoError("checkpoint is missing parameter " + item.key());
    }
    if (!item.value().sizes().equals(it->second->sizes())) {
      throw ShapeError("checkpoint parameter " + item.key() + " has a different shape");
    }
    item.value().copy_(*it->second);
  }
  for (auto& item : model->named_buffers()) {
    auto it = lookup.find(item.key());
    if (it == lookup.end()) continue;
    item.value().set_(it->second->clone());
  }
}

void restore_optimizer(const StHyper& model, torch::optim::Adam& optimizer, const NamedTensors& state) {
  std::map<std::string, const torch::Tensor*> lookup;
  for (const auto& [name, t] : state) lookup[name] = &t;
  auto& opt_state = optimizer.state();
  for (const auto& item : model->named_parameters()) {
    auto avg = lookup.find(item.key() + "/exp_avg");
    auto sq = lookup.find(item.key() + "/exp_avg_sq");
    auto step = lookup.find(item.key() + "/step");
    if (avg == lookup.end() || sq == lookup.end() || step == lookup.end()) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(step->second->item<std::int64_t>());
    s->exp_avg(avg->second->clone());
    s->exp_avg_sq(sq->second->clone());
    opt_state[item.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

StHyper instantiate(const Checkpoint& checkpoint) {
  StHyper model(checkpoint.config, checkpoint.n_vars);
  restore_state(model, checkpoint.parameters);
  model->eval();
  return model;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  }
  std::ofstream blob(dir / "tensors.bin", std::ios::binary);
  if (!blob) {
    throw IoError("cannot write " + (dir / "tensors.bin").string());
  }
  json tensors = json::array();
  std::int64_t offset = 0;
  write_tensors(checkpoint.parameters, "model", blob, tensors, offset);
  write_tensors(checkpoint.optimizer, "optimizer", blob, tensors, offset);
  blob.close();
  if (!blob) {
    throw IoError("failed writing " + (dir / "tensors.bin").string());
  }

  json manifest = {{"format", "sthyper-checkpoint"}, {"version", 1}, {"byte_order", "little"}, {"tensors", tensors}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

  json meta = {{"config", to_json(checkpoint.config)},
               {"config_hash", checkpoint.config.hash()},
               {"n_vars", checkpoint.n_vars},
               {"variable_names", checkpoint.variable_names},
               {"norm_stats", {{"mean", checkpoint.norm_stats.mean}, {"std", checkpoint.norm_stats.stddev}}},
               {"epoch", checkpoint.epoch},
               {"best_val_loss", checkpoint.best_val_loss}};
  std::ofstream meta_out(dir / "metadata.json");
  meta_out << meta.dump(2) << '\n';
  if (!meta_out) {
    throw IoError("failed writing " + (dir / "metadata.json").string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest_in(dir / "manifest.json");
  std::ifstream meta_in(dir / "metadata.json");
  if (!manifest_in || !meta_in) {
    throw IoError("not a checkpoint directory: " + dir.string());
  }
  json manifest;
  json meta;
  try {
    manifest_in >> manifest;
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint metadata in " + dir.string() + ": " + e.what());
  }

  Checkpoint ck;
  ck.config = config_from_json(meta.at("config"));
  if (meta.value("config_hash", std::string()) != ck.config.hash()) {
    throw IoError("checkpoint config hash mismatch in " + dir.string());
  }
  ck.n_vars = meta.at("n_vars").get<std::int64_t>();
  ck.variable_names = meta.at("variable_names").get<std::vector<std::string>>();
  ck.norm_stats.mean = meta.at("norm_stats").at("mean").get<std::vector<double>>();
  ck.norm_stats.stddev = meta.at("norm_stats").at("std").get<std::vector<double>>();
  ck.epoch = meta.at("epoch").get<std::int64_t>();
  ck.best_val_loss = meta.at("best_val_loss").get<double>();

  std::ifstream blob(dir / "tensors.bin", std::ios::binary);
  if (!blob) {
    throw IoError("missing tensors.bin in " + dir.string());
  }
  for (const auto& entry : manifest.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
    auto t = torch::empty(shape, dtype);
    const auto nbytes = entry.at("nbytes").get<std::int64_t>();
    if (nbytes != static_cast<std::int64_t>(t.numel() * t.element_size())) {
      throw IoError("checkpoint manifest size mismatch for " + entry.at("name").get<std::string>());
    }
    blob.seekg(entry.at("offset").get<std::int64_t>());
    blob.read(static_cast<char*>(t.data_ptr()), nbytes);
    if (blob.gcount() != nbytes) {
      throw IoError("truncated tensors.bin in " + dir.string());
    }
    auto& target = entry.at("group").get<std::string>() == "optimizer" ? ck.optimizer : ck.parameters;
    target.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ck;
}

}  // namespace sthyper
