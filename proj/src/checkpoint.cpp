#include "awh/checkpoint.hpp"

#include "json.hpp"

#include <stdexcept>

namespace awh {

using nlohmann::json;

namespace {

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key,
                        const std::filesystem::path& path) {
  c10::IValue value;
  if (!archive.try_read(key, value) || !value.isString()) {
    throw std::runtime_error(path.string() + ": not an " + kCheckpointFormat + " archive (no " +
                             key + ")");
  }
  return value.toStringRef();
}

torch::serialize::InputArchive open(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint " + path.string() + " not found");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw std::runtime_error("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  const auto format = read_string(archive, "format", path);
  if (format != kCheckpointFormat) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint format '" + format + "'");
  }
  return archive;
}

template <typename Saveable>
void write_part(torch::serialize::OutputArchive& archive, const std::string& key, Saveable& part) {
  torch::serialize::OutputArchive sub;
  part.save(sub);
  archive.write(key, sub);
}

template <typename Loadable>
void read_part(torch::serialize::InputArchive& archive, const std::string& key, Loadable& part,
               const std::filesystem::path& path) {
  torch::serialize::InputArchive sub;
  if (!archive.try_read(key, sub)) throw std::runtime_error(path.string() + ": archive has no " + key);
  part.load(sub);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                      const CheckpointParts& parts) {
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
  const json j = {{"config", to_json(meta.config)},
                  {"depth_size", meta.depth_size},
                  {"pretrain_epoch", meta.state.pretrain_epoch},
                  {"train_epoch", meta.state.train_epoch}};
  archive.write("meta", c10::IValue(j.dump()));
  if (parts.model) write_part(archive, "model", **parts.model);
  if (parts.renderer) write_part(archive, "renderer", **parts.renderer);
  if (parts.critic) write_part(archive, "critic", **parts.critic);
  if (parts.main_opt) write_part(archive, "main_opt", *parts.main_opt);
  if (parts.critic_opt) write_part(archive, "critic_opt", *parts.critic_opt);

  // write to a sibling file first so a crash never leaves a torn checkpoint
  auto tmp = path;
  tmp += ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw std::runtime_error("cannot write checkpoint " + tmp.string() + ": " + e.what_without_backtrace());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  auto archive = open(path);
  const auto text = read_string(archive, "meta", path);
  CheckpointMeta meta;
  try {
    const auto j = json::parse(text);
    meta.config = train_config_from_json(j.at("config"));
    meta.depth_size = j.at("depth_size").get<int64_t>();
    meta.state.pretrain_epoch = j.at("pretrain_epoch").get<int>();
    meta.state.train_epoch = j.at("train_epoch").get<int>();
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  return meta;
}

void read_checkpoint(const std::filesystem::path& path, const CheckpointParts& parts) {
  auto archive = open(path);
  try {
    if (parts.model) read_part(archive, "model", **parts.model, path);
    if (parts.renderer) read_part(archive, "renderer", **parts.renderer, path);
    if (parts.critic) read_part(archive, "critic", **parts.critic, path);
    if (parts.main_opt) read_part(archive, "main_opt", *parts.main_opt, path);
    if (parts.critic_opt) read_part(archive, "critic_opt", *parts.critic_opt, path);
  } catch (const c10::Error& e) {
    throw std::runtime_error(path.string() + ": " + e.what_without_backtrace());
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel out;
  out.meta = read_checkpoint_meta(path);
  auto cfg = out.meta.config.model;
  cfg.intermediate_tap = out.meta.config.fss_tap;
  out.model = PoseNet(cfg);
  read_checkpoint(path, {&out.model});
  out.model->eval();
  return out;
}

}  // namespace awh
