#include "awh/trainer.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace awh {

using nlohmann::json;

std::vector<int64_t> balance_target(int64_t source_count, int64_t target_count) {
  if (target_count <= 0) throw std::invalid_argument("balance_target: target set is empty");
  if (source_count < 0) throw std::invalid_argument("balance_target: negative source count");
  std::vector<int64_t> out(static_cast<std::size_t>(source_count));
  for (int64_t i = 0; i < source_count; ++i) out[static_cast<std::size_t>(i)] = i % target_count;
  return out;
}

double total_loss(const LossComponents<double>& c, const TrainConfig& config) {
  const std::pair<const char*, double> named[] = {
      {"wd", c.wd},
      {"res_source_25d", c.res_source_25d},
      {"res_target_2d", c.res_target_2d},
      {"reg_source", c.reg_source},
      {"reg_target", c.reg_target},
      {"fss", c.fss}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) {
      throw std::runtime_error(std::string("non-finite loss component ") + name + " = " +
                               std::to_string(value));
    }
  }
  return combine_losses(c, config);
}

json StepReport::to_json() const {
  json j = {{"type", "step"},
            {"phase", phase},
            {"epoch", epoch},
            {"step", step},
            {"wd", losses.wd},
            {"gp", gp},
            {"res_source_25d", losses.res_source_25d},
            {"res_target_2d", losses.res_target_2d},
            {"reg_source", losses.reg_source},
            {"reg_target", losses.reg_target},
            {"fss", losses.fss},
            {"total", total}};
  if (alpha) {
    j["alpha"] = {{"min", alpha->min}, {"mean", alpha->mean}, {"max", alpha->max}};
  } else {
    j["alpha"] = nullptr;
  }
  return j;
}

at::Generator make_generator(uint64_t seed, uint64_t phase, uint64_t epoch) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(phase), static_cast<uint32_t>(epoch),
                    static_cast<uint32_t>(epoch >> 32)};
  std::array<uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  const uint64_t mixed = (static_cast<uint64_t>(words[0]) << 32) | words[1];
  return at::make_generator<at::CPUGeneratorImpl>(mixed);
}

namespace {

using TensorLosses = LossComponents<torch::Tensor>;

torch::Tensor zero() { return torch::zeros({}, torch::kFloat64); }

TensorLosses zero_losses() { return {zero(), zero(), zero(), zero(), zero(), zero()}; }

// depth half of loss_25d
torch::Tensor depth_term(const torch::Tensor& pred_zn, const torch::Tensor& gt_zn, double lambda_alpha) {
  return lambda_alpha * (pred_zn - gt_zn).abs().sum(1).mean();
}

Pose25DBatch rows(const Pose25DBatch& p, int64_t begin, int64_t end) {
  return {p.uv.slice(0, begin, end), p.zn.slice(0, begin, end)};
}

AlphaSummary summarize(const torch::Tensor& alpha) {
  const auto a = alpha.detach().to(torch::kFloat64);
  return {a.min().item<double>(), a.mean().item<double>(), a.max().item<double>()};
}

void check_batch(const Batch& b, const char* what, int64_t expected) {
  if (b.size() != expected) {
    throw std::invalid_argument(std::string(what) + " batch has " + std::to_string(b.size()) +
                                " samples, expected " + std::to_string(expected));
  }
}

// Converts to double, fills the report, and aborts on non-finite values
// before any parameter changes.
torch::Tensor finalize(TensorLosses& t, StepReport& report, const TrainConfig& config) {
  for (auto* p : {&t.wd, &t.res_source_25d, &t.res_target_2d, &t.reg_source, &t.reg_target, &t.fss}) {
    *p = p->to(torch::kFloat64);
  }
  report.losses = {t.wd.item<double>(),         t.res_source_25d.item<double>(),
                   t.res_target_2d.item<double>(), t.reg_source.item<double>(),
                   t.reg_target.item<double>(),  t.fss.item<double>()};
  const auto total = combine_losses(t, config);
  report.total = total.item<double>();
  try {
    total_loss(report.losses, config);
  } catch (const std::runtime_error& e) {
    throw NonFiniteLoss(std::string(e.what()) + " at " + report.phase + " epoch " +
                            std::to_string(report.epoch) + " step " + std::to_string(report.step),
                        report);
  }
  return total;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, int64_t depth_size) : config_(config), depth_size_(depth_size) {
  config_.validate();
  config_.model.intermediate_tap = config_.fss_tap;
  // construction order fixes the initial weights: the critic comes last so
  // that its presence never shifts the pose network's initialization
  torch::manual_seed(config_.seed);
  model_ = PoseNet(config_.model);
  DepthRendererOptions ro;
  ro.image_size = config_.model.image_size;
  ro.depth_size = depth_size;
  ro.hidden = config_.depth_hidden;
  renderer_ = DepthRenderer(ro);
  CriticOptions co;
  co.input_dim = config_.model.latent_channels;
  co.hidden_width = config_.critic_hidden;
  critic_ = CriticNet(co);

  auto params = model_->parameters();
  for (auto& p : renderer_->parameters()) params.push_back(p);
  main_opt_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(config_.lr_main));
  critic_opt_ = std::make_unique<torch::optim::Adam>(
      critic_->parameters(), torch::optim::AdamOptions(config_.lr_critic).betas({0.5, 0.9}));
}

StepReport Trainer::pretrain_step(const Batch& source) {
  if (!source.zn) throw std::invalid_argument("pretrain: source batch lacks 3D labels");
  model_->train();
  renderer_->train();
  StepReport report;
  report.phase = "pretrain";
  report.epoch = state_.pretrain_epoch;
  report.step = step_index_;

  const auto out = model_->forward(source.images);
  const Pose25DBatch gt{source.uv, *source.zn};
  auto t = zero_losses();
  t.res_source_25d = loss_25d(out.pose, gt, config_.lambda_alpha);
  t.reg_source = loss_depth(renderer_->forward(source.uv, out.pose.zn), source.depth);
  if (auto inter = model_->intermediate_outputs(out)) {
    const auto p = readout(*inter, config_.model.image_size);
    if (config_.fss_losses.contains(FssLoss::R2D)) t.fss = t.fss + loss_2d(p.uv, source.uv);
    if (config_.fss_losses.contains(FssLoss::R3D)) {
      t.fss = t.fss + depth_term(p.zn, *source.zn, config_.lambda_alpha);
    }
  }
  auto total = finalize(t, report, config_);
  main_opt_->zero_grad();
  total.backward();
  main_opt_->step();
  return report;
}

StepReport Trainer::train_step(const Batch& source, const Batch& target, at::Generator& gen) {
  if (target.carries_3d()) {
    throw std::invalid_argument("weak-supervision guard: the target batch carries 3D labels");
  }
  if (!source.zn) throw std::invalid_argument("train: source batch lacks 3D labels");
  const int64_t h = config_.batch_size / 2;
  check_batch(source, "source", h);
  check_batch(target, "target", h);
  model_->train();
  renderer_->train();
  StepReport report;
  report.phase = "train";
  report.epoch = state_.train_epoch;
  report.step = step_index_;

  const auto out = model_->forward(torch::cat({source.images, target.images}));
  const auto pose_s = rows(out.pose, 0, h);
  const auto pose_t = rows(out.pose, h, 2 * h);
  auto t = zero_losses();
  t.res_source_25d = loss_25d(pose_s, {source.uv, *source.zn}, config_.lambda_alpha);
  t.res_target_2d = loss_2d(pose_t.uv, target.uv);
  // ground-truth 2D keypoints drive the renderer in both domains
  t.reg_source = loss_depth(renderer_->forward(source.uv, pose_s.zn), source.depth);
  t.reg_target = loss_depth(renderer_->forward(target.uv, pose_t.zn), target.depth);
  if (auto inter = model_->intermediate_outputs(out)) {
    const auto p = readout(*inter, config_.model.image_size);
    const auto ps = rows(p, 0, h);
    const auto pt = rows(p, h, 2 * h);
    if (config_.fss_losses.contains(FssLoss::R2D)) t.fss = t.fss + loss_2d(ps.uv, source.uv);
    if (config_.fss_losses.contains(FssLoss::R3D)) {
      t.fss = t.fss + depth_term(ps.zn, *source.zn, config_.lambda_alpha);
    }
    if (config_.fss_losses.contains(FssLoss::S2D)) t.fss = t.fss + loss_2d(pt.uv, target.uv);
  }

  if (config_.adversarial()) {
    const FeatureMap zs{out.latent.slice(0, 0, h), Domain::Source};
    const FeatureMap zt{out.latent.slice(0, h, 2 * h), Domain::Target};
    ChannelWeights w;
    if (config_.use_awh) {
      w = config_.alpha_grad ? channel_similarity_differentiable(zs, zt) : channel_similarity(zs, zt);
      if (config_.alpha_clamp) w.alpha = w.alpha.clamp_min(0.0);
    } else {
      w.alpha = torch::ones({zs.channels()}, out.latent.options().requires_grad(false));
    }
    report.alpha = summarize(w.alpha);
    const auto pooled_s = pool_features(apply_weights(zs, w));
    const auto pooled_t = pool_features(apply_weights(zt, w));

    const auto ds = pooled_s.detach();
    const auto dt = pooled_t.detach();
    for (int i = 0; i < config_.n_critic; ++i) {
      critic_opt_->zero_grad();
      auto adv = critic_objective(critic_, ds, dt, config_.lambda_gp, gen);
      adv.combined.backward();
      critic_opt_->step();
      report.gp = adv.gp.item<double>();
    }

    // the extractor sees the critic as a fixed function
    for (auto& p : critic_->parameters()) p.requires_grad_(false);
    t.wd = wd_loss(critic_, pooled_s, pooled_t);
    for (auto& p : critic_->parameters()) p.requires_grad_(true);
  }

  auto total = finalize(t, report, config_);
  main_opt_->zero_grad();
  total.backward();
  main_opt_->step();
  return report;
}

void Trainer::pretrain(const Dataset& source, const StepSink& sink) {
  while (state_.pretrain_epoch < config_.pretrain_epochs) pretrain_epoch(source, sink);
}

void Trainer::pretrain_epoch(const Dataset& source, const StepSink& sink) {
  const int64_t n = source.size();
  const int64_t bs = std::min<int64_t>(config_.batch_size, n);
  auto gen = make_generator(config_.seed, 0, static_cast<uint64_t>(state_.pretrain_epoch));
  const auto perm = torch::randperm(n, gen, torch::kLong);
  const auto* idx = perm.data_ptr<int64_t>();
  int64_t steps = n / bs;
  if (config_.max_steps_per_epoch > 0) steps = std::min(steps, config_.max_steps_per_epoch);
  for (int64_t s = 0; s < steps; ++s) {
    std::vector<int64_t> ids(idx + s * bs, idx + (s + 1) * bs);
    step_index_ = s;
    const auto report = pretrain_step(source.make_batch(ids, Supervision::Full));
    if (sink) sink(report);
  }
  ++state_.pretrain_epoch;
}

void Trainer::train_epoch(const Dataset& source, const Dataset& target, const StepSink& sink) {
  const int64_t n = source.size();
  const int64_t h = config_.batch_size / 2;
  if (n < h) {
    throw std::invalid_argument("train: source set (" + std::to_string(n) +
                                ") is smaller than half a batch");
  }
  auto gen = make_generator(config_.seed, 1, static_cast<uint64_t>(state_.train_epoch));
  const auto src_perm = torch::randperm(n, gen, torch::kLong);
  const auto tgt_perm = torch::randperm(n, gen, torch::kLong);
  const auto balanced = balance_target(n, target.size());
  const auto* sp = src_perm.data_ptr<int64_t>();
  const auto* tp = tgt_perm.data_ptr<int64_t>();
  int64_t steps = n / h;
  if (config_.max_steps_per_epoch > 0) steps = std::min(steps, config_.max_steps_per_epoch);
  for (int64_t s = 0; s < steps; ++s) {
    std::vector<int64_t> sid(sp + s * h, sp + (s + 1) * h);
    std::vector<int64_t> tid;
    for (int64_t i = s * h; i < (s + 1) * h; ++i) tid.push_back(balanced[static_cast<std::size_t>(tp[i])]);
    step_index_ = s;
    const auto report = train_step(source.make_batch(sid, Supervision::Full),
                                   target.make_batch(tid, Supervision::Weak), gen);
    if (sink) sink(report);
  }
  ++state_.train_epoch;
}

void Trainer::save(const std::filesystem::path& path) const {
  auto& self = const_cast<Trainer&>(*this);
  write_checkpoint(path, {config_, depth_size_, state_},
                   {&self.model_, &self.renderer_, &self.critic_, self.main_opt_.get(),
                    self.critic_opt_.get()});
}

void Trainer::load(const std::filesystem::path& path) {
  const auto meta = read_checkpoint_meta(path);
  const auto stored = to_json(meta.config);
  const auto mine = to_json(config_);
  for (const char* key : {"model", "critic_hidden", "depth_hidden", "fss_tap"}) {
    if (stored.at(key) != mine.at(key)) {
      throw std::runtime_error(path.string() + ": checkpoint architecture differs in '" + key + "'");
    }
  }
  if (meta.depth_size != depth_size_) {
    throw std::runtime_error(path.string() + ": checkpoint depth size differs");
  }
  read_checkpoint(path, {&model_, &renderer_, &critic_, main_opt_.get(), critic_opt_.get()});
  state_ = meta.state;
}

namespace {

void check_compatible(const Dataset& a, const Dataset& b, const char* name) {
  if (a.image_size != b.image_size || a.depth_size != b.depth_size) {
    throw std::invalid_argument(std::string("train: ") + name +
                                " resolution differs from the source split");
  }
}

json eval_record(const EvalReport& r, int epoch) {
  auto j = to_json(r);
  j["type"] = "eval";
  j["epoch"] = epoch;
  return j;
}

}  // namespace

RunResult run(const TrainConfig& config_in, const Dataset& source, const Dataset& target_train,
              const Dataset* target_test, const std::filesystem::path& output_dir,
              const RunOptions& options) {
  if (source.domain != Domain::Source) throw std::invalid_argument("train: first split must be source");
  if (target_train.domain != Domain::Target) throw std::invalid_argument("train: second split must be target");
  check_compatible(source, target_train, "target_train");
  if (target_test) check_compatible(source, *target_test, "target_test");

  TrainConfig config = config_in;
  config.model.image_size = source.image_size;
  Trainer trainer(config, source.depth_size);
  if (options.resume) trainer.load(*options.resume);

  std::filesystem::create_directories(output_dir);
  RunResult result;
  result.paths = {output_dir / "metrics.jsonl", output_dir / "checkpoint.pt"};
  std::ofstream log(result.paths.metrics, options.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + result.paths.metrics.string());
  const auto emit = [&](const json& j) {
    log << j.dump() << '\n';
    log.flush();
    if (!log) throw std::runtime_error("failed writing " + result.paths.metrics.string());
  };
  const auto sink = [&](const StepReport& r) { emit(r.to_json()); };
  const auto checkpoint = [&](const std::string& phase, int epoch) {
    trainer.save(result.paths.checkpoint);
    if (options.keep_epoch_checkpoints) {
      const auto copy = output_dir / ("checkpoint_" + phase + "_" + std::to_string(epoch) + ".pt");
      std::filesystem::copy_file(result.paths.checkpoint, copy,
                                 std::filesystem::copy_options::overwrite_existing);
    }
    if (options.on_checkpoint) options.on_checkpoint(result.paths.checkpoint);
  };

  try {
    while (trainer.state().pretrain_epoch < config.pretrain_epochs) {
      const int epoch = trainer.state().pretrain_epoch;
      trainer.pretrain_epoch(source, sink);
      checkpoint("pretrain", epoch);
    }
    while (trainer.state().train_epoch < config.train_epochs) {
      const int epoch = trainer.state().train_epoch;
      trainer.train_epoch(source, target_train, sink);
      if (target_test && config.eval_interval > 0 && (epoch + 1) % config.eval_interval == 0) {
        result.final_eval = evaluate(trainer.model(), *target_test);
        emit(eval_record(*result.final_eval, epoch));
      }
      checkpoint("train", epoch);
    }
  } catch (const NonFiniteLoss& e) {
    json j = e.report.to_json();
    j["type"] = "abort";
    j["error"] = e.what();
    emit(j);
    throw;
  }
  if (target_test && !result.final_eval) result.final_eval = evaluate(trainer.model(), *target_test);
  if (!std::filesystem::exists(result.paths.checkpoint)) trainer.save(result.paths.checkpoint);
  return result;
}

}  // namespace awh
