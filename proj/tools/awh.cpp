// Command-line front end: gen, train, eval, project, oracle.

#include "awh/checkpoint.hpp"
#include "awh/config.hpp"
#include "awh/dataset.hpp"
#include "awh/eval.hpp"
#include "awh/oracle.hpp"
#include "awh/trainer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace awh;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
};

ConfigFile config_from(const Common& c) {
  return c.config.empty() ? ConfigFile{} : load_config(c.config);
}

int cmd_gen(const Common& common, const std::string& out, const std::optional<int64_t>& image_size,
            const std::optional<int64_t>& depth_size, const std::vector<int64_t>& counts) {
  auto cfg = config_from(common).generate;
  if (common.seed) cfg.seed = *common.seed;
  if (image_size) cfg.image_size = *image_size;
  if (depth_size) cfg.depth_size = *depth_size;
  if (!counts.empty()) {
    cfg.n_source_train = counts.at(0);
    cfg.n_target_train = counts.at(1);
    cfg.n_target_test = counts.at(2);
  }
  cfg.validate();
  const auto paths = generate_dataset(cfg, out);
  std::cout << "wrote " << paths.source_train.string() << "\n      " << paths.target_train.string()
            << "\n      " << paths.target_test.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string data, source, target, test, out, resume, mode;
  std::optional<int> pretrain_epochs, train_epochs;
  std::optional<int64_t> max_steps;
  std::vector<std::string> fss;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  auto cfg = config_from(common).train;
  if (common.seed) cfg.seed = *common.seed;
  if (a.pretrain_epochs) cfg.pretrain_epochs = *a.pretrain_epochs;
  if (a.train_epochs) cfg.train_epochs = *a.train_epochs;
  if (a.max_steps) cfg.max_steps_per_epoch = *a.max_steps;
  if (!a.mode.empty()) {
    cfg.use_awh = a.mode == "awh";
    cfg.use_plain_wd = a.mode == "plain";
  }
  if (!a.fss.empty()) {
    cfg.fss_tap = true;
    cfg.fss_losses.clear();
    for (const auto& l : a.fss) cfg.fss_losses.insert(fss_loss_from_string(l));
  }
  cfg.validate();

  const std::filesystem::path dir = a.data;
  const auto pick = [&](const std::string& explicit_path, const char* name) {
    return explicit_path.empty() ? dir / name : std::filesystem::path(explicit_path);
  };
  NormalizationSpec norm;
  norm.constant_c = cfg.constant_c;
  const auto source = Dataset::load(pick(a.source, "source_train.jsonl"), norm);
  const auto target = Dataset::load(pick(a.target, "target_train.jsonl"), norm);
  std::optional<Dataset> test;
  const auto test_path = pick(a.test, "target_test.jsonl");
  if (std::filesystem::exists(test_path)) test = Dataset::load(test_path, norm);

  RunOptions options;
  if (!a.resume.empty()) options.resume = a.resume;
  const auto result = run(cfg, source, target, test ? &*test : nullptr, a.out, options);
  std::cout << "metrics: " << result.paths.metrics.string() << "\ncheckpoint: "
            << result.paths.checkpoint.string() << '\n';
  if (result.final_eval) {
    std::printf("target test: mean EPE %.3f mm, AUC@20-50mm %.4f\n", result.final_eval->mean_epe_mm,
                result.final_eval->auc);
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& out,
             const std::string& range) {
  const auto loaded = load_model(ckpt);
  NormalizationSpec norm;
  norm.constant_c = loaded.meta.config.constant_c;
  const auto data = Dataset::load(manifest, norm);
  if (data.image_size != loaded.meta.config.model.image_size) {
    throw std::invalid_argument("eval: manifest image size differs from the checkpoint's network");
  }
  const auto thresholds = range == "0-30" ? thresholds_0_30() : thresholds_20_50();
  auto model = loaded.model;
  const auto report = evaluate(model, data, thresholds);
  std::filesystem::create_directories(out);
  const auto report_path = std::filesystem::path(out) / "report.json";
  const auto csv_path = std::filesystem::path(out) / "pck.csv";
  write_report(report, report_path);
  write_pck_csv(report.pck, csv_path);
  std::printf("samples %lld\nmean EPE %.3f mm\nAUC@%smm %.4f\n", static_cast<long long>(report.samples),
              report.mean_epe_mm, range.c_str(), report.auc);
  if (report.invalid_lifts > 0) {
    std::printf("warning: %lld lifted poses had non-positive depth\n",
                static_cast<long long>(report.invalid_lifts));
  }
  std::cout << "wrote " << report_path.string() << " and " << csv_path.string() << '\n';
  return 0;
}

int cmd_project(const std::string& ckpt, const std::vector<std::string>& manifests,
                const std::string& out, int64_t samples) {
  const auto loaded = load_model(ckpt);
  NormalizationSpec norm;
  norm.constant_c = loaded.meta.config.constant_c;
  const auto source = Dataset::load(manifests.at(0), norm);
  const auto target = Dataset::load(manifests.at(1), norm);
  if (source.domain != Domain::Source || target.domain != Domain::Target) {
    throw std::invalid_argument("project: expected a source manifest followed by a target manifest");
  }
  auto model = loaded.model;
  const auto points = project_features(model, source, target, samples, &std::cerr);
  write_scatter_csv(points, out);
  std::cout << "wrote " << points.size() << " points to " << out << '\n';
  return 0;
}

int cmd_oracle(const Common& common) {
  bool ok = true;
  for (const auto& check : run_oracle_suite(common.seed.value_or(0))) {
    std::printf("%s %s: %s\n", check.pass ? "PASS" : "FAIL", check.name.c_str(), check.detail.c_str());
    ok = ok && check.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial feature alignment for 2.5D hand pose on a toy two-domain dataset"};
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config with generate/train sections")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the seed");
  };

  auto* gen = app.add_subcommand("gen", "render the toy dataset");
  std::string gen_out;
  std::optional<int64_t> image_size, depth_size;
  std::vector<int64_t> counts;
  add_common(gen);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--image-size", image_size, "RGB side in pixels");
  gen->add_option("--depth-size", depth_size, "depth image side");
  gen->add_option("--counts", counts, "source_train target_train target_test")->expected(3);

  auto* train = app.add_subcommand("train", "pretrain and train, writing metrics and checkpoints");
  TrainArgs ta;
  add_common(train);
  train->add_option("--data", ta.data, "directory written by gen");
  train->add_option("--source", ta.source, "source_train manifest");
  train->add_option("--target", ta.target, "target_train manifest");
  train->add_option("--test", ta.test, "target_test manifest");
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--ckpt", ta.resume, "resume from this checkpoint")->check(CLI::ExistingFile);
  train->add_option("--mode", ta.mode, "adversarial mode")
      ->check(CLI::IsMember({"awh", "plain", "none"}));
  train->add_option("--pretrain-epochs", ta.pretrain_epochs);
  train->add_option("--epochs", ta.train_epochs);
  train->add_option("--max-steps", ta.max_steps, "cap on steps per epoch");
  train->add_option("--fss", ta.fss, "intermediate losses (R2D R3D S2D); enables the tap");

  auto* ev = app.add_subcommand("eval", "score a checkpoint on a manifest");
  std::string ev_ckpt, ev_manifest, ev_out, ev_range = "20-50";
  ev->add_option("--ckpt", ev_ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--manifest", ev_manifest)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "directory for report.json and pck.csv")->required();
  ev->add_option("--range", ev_range, "PCK threshold range")->check(CLI::IsMember({"20-50", "0-30"}));

  auto* pr = app.add_subcommand("project", "export a 2D principal-component scatter of features");
  std::string pr_ckpt, pr_out;
  std::vector<std::string> pr_manifests;
  int64_t pr_samples = 2000;
  pr->add_option("--ckpt", pr_ckpt)->required()->check(CLI::ExistingFile);
  pr->add_option("--manifest", pr_manifests, "source then target manifest")
      ->required()
      ->expected(2)
      ->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "CSV path")->required();
  pr->add_option("--samples", pr_samples, "total samples, half per domain");

  auto* orc = app.add_subcommand("oracle", "W1 calibration and gradient checks");
  add_common(orc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(common, gen_out, image_size, depth_size, counts);
    if (*train) {
      if (ta.data.empty() && (ta.source.empty() || ta.target.empty())) {
        std::cerr << "train: give --data or both --source and --target\n" << app.help();
        return 2;
      }
      return cmd_train(common, ta);
    }
    if (*ev) return cmd_eval(ev_ckpt, ev_manifest, ev_out, ev_range);
    if (*pr) return cmd_project(pr_ckpt, pr_manifests, pr_out, pr_samples);
    if (*orc) return cmd_oracle(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
