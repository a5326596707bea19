#include "awh/config.hpp"

#include <fstream>
#include <stdexcept>

namespace awh {

using nlohmann::json;

void GenConfig::validate() const {
  if (image_size < 64 || (image_size & (image_size - 1)) != 0) {
    throw std::invalid_argument("generate: image_size must be a power of two >= 64");
  }
  if (depth_size < 8) throw std::invalid_argument("generate: depth_size must be >= 8");
  if (n_source_train < 1 || n_target_train < 1 || n_target_test < 1) {
    throw std::invalid_argument("generate: every split needs at least one sample");
  }
}

void TrainConfig::validate() const {
  for (double v : {lambda_wd, lambda_res, lambda_reg, lambda_gp, lambda_alpha}) {
    if (!(v >= 0.0)) throw std::invalid_argument("train: loss weights must be nonnegative");
  }
  if (!(lr_main > 0.0) || !(lr_critic > 0.0)) {
    throw std::invalid_argument("train: learning rates must be positive");
  }
  if (n_critic < 1) throw std::invalid_argument("train: n_critic must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw std::invalid_argument("train: batch_size must be even (half source, half target)");
  }
  if (pretrain_epochs < 0 || train_epochs < 0) {
    throw std::invalid_argument("train: epoch counts must be nonnegative");
  }
  if (use_awh && use_plain_wd) {
    throw std::invalid_argument("train: use_awh and use_plain_wd are mutually exclusive");
  }
  if (!fss_losses.empty() && !fss_tap) {
    throw std::invalid_argument("train: fss_losses requires fss_tap");
  }
  if (!(constant_c > 0.0)) throw std::invalid_argument("train: constant_c must be positive");
  if (eval_interval < 0 || max_steps_per_epoch < 0) {
    throw std::invalid_argument("train: eval_interval and max_steps_per_epoch must be >= 0");
  }
  HourglassConfig m = model;
  m.intermediate_tap = fss_tap;
  m.validate();
}

std::string to_string(FssLoss loss) {
  switch (loss) {
    case FssLoss::R2D: return "R2D";
    case FssLoss::R3D: return "R3D";
    case FssLoss::S2D: return "S2D";
  }
  return "?";
}

FssLoss fss_loss_from_string(const std::string& s) {
  if (s == "R2D") return FssLoss::R2D;
  if (s == "R3D") return FssLoss::R3D;
  if (s == "S2D") return FssLoss::S2D;
  throw std::invalid_argument("unknown intermediate loss '" + s + "' (expected R2D, R3D or S2D)");
}

namespace {

// Copies known keys from j into fields; throws on anything unrecognized.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw std::invalid_argument(section_ + ": expected an object");
  }

  template <typename T>
  Reader& field(const char* key, T& out) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw std::invalid_argument(section_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw std::invalid_argument(section_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

json to_json(const HourglassConfig& m) {
  return {{"stacks", m.stacks}, {"latent_channels", m.latent_channels},
          {"image_size", m.image_size}, {"levels", m.levels},
          {"skip_connections", m.skip_connections}};
}

HourglassConfig model_from_json(const json& j) {
  HourglassConfig m;
  Reader(j, "train.model")
      .field("stacks", m.stacks)
      .field("latent_channels", m.latent_channels)
      .field("image_size", m.image_size)
      .field("levels", m.levels)
      .field("skip_connections", m.skip_connections)
      .finish();
  return m;
}

}  // namespace

json to_json(const GenConfig& c) {
  return {{"seed", c.seed}, {"image_size", c.image_size}, {"depth_size", c.depth_size},
          {"n_source_train", c.n_source_train}, {"n_target_train", c.n_target_train},
          {"n_target_test", c.n_target_test}};
}

json to_json(const TrainConfig& c) {
  json losses = json::array();
  for (auto l : c.fss_losses) losses.push_back(to_string(l));
  return {{"lambda_wd", c.lambda_wd},
          {"lambda_res", c.lambda_res},
          {"lambda_reg", c.lambda_reg},
          {"lambda_gp", c.lambda_gp},
          {"lambda_alpha", c.lambda_alpha},
          {"lr_main", c.lr_main},
          {"lr_critic", c.lr_critic},
          {"n_critic", c.n_critic},
          {"batch_size", c.batch_size},
          {"pretrain_epochs", c.pretrain_epochs},
          {"train_epochs", c.train_epochs},
          {"seed", c.seed},
          {"use_awh", c.use_awh},
          {"use_plain_wd", c.use_plain_wd},
          {"fss_tap", c.fss_tap},
          {"fss_losses", losses},
          {"constant_c", c.constant_c},
          {"alpha_grad", c.alpha_grad},
          {"alpha_clamp", c.alpha_clamp},
          {"eval_interval", c.eval_interval},
          {"max_steps_per_epoch", c.max_steps_per_epoch},
          {"critic_hidden", c.critic_hidden},
          {"depth_hidden", c.depth_hidden},
          {"model", to_json(c.model)}};
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig c;
  Reader(j, "generate")
      .field("seed", c.seed)
      .field("image_size", c.image_size)
      .field("depth_size", c.depth_size)
      .field("n_source_train", c.n_source_train)
      .field("n_target_train", c.n_target_train)
      .field("n_target_test", c.n_target_test)
      .finish();
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  std::vector<std::string> losses;
  json model = json::object();
  Reader(j, "train")
      .field("lambda_wd", c.lambda_wd)
      .field("lambda_res", c.lambda_res)
      .field("lambda_reg", c.lambda_reg)
      .field("lambda_gp", c.lambda_gp)
      .field("lambda_alpha", c.lambda_alpha)
      .field("lr_main", c.lr_main)
      .field("lr_critic", c.lr_critic)
      .field("n_critic", c.n_critic)
      .field("batch_size", c.batch_size)
      .field("pretrain_epochs", c.pretrain_epochs)
      .field("train_epochs", c.train_epochs)
      .field("seed", c.seed)
      .field("use_awh", c.use_awh)
      .field("use_plain_wd", c.use_plain_wd)
      .field("fss_tap", c.fss_tap)
      .field("fss_losses", losses)
      .field("constant_c", c.constant_c)
      .field("alpha_grad", c.alpha_grad)
      .field("alpha_clamp", c.alpha_clamp)
      .field("eval_interval", c.eval_interval)
      .field("max_steps_per_epoch", c.max_steps_per_epoch)
      .field("critic_hidden", c.critic_hidden)
      .field("depth_hidden", c.depth_hidden)
      .field("model", model)
      .finish();
  for (const auto& l : losses) c.fss_losses.insert(fss_loss_from_string(l));
  c.model = model_from_json(model);
  c.validate();
  return c;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  ConfigFile cfg;
  Reader r(j, "config");
  json gen = json::object(), train = json::object();
  r.field("generate", gen).field("train", train).finish();
  cfg.generate = gen_config_from_json(gen);
  cfg.train = train_config_from_json(train);
  return cfg;
}

}  // namespace awh
