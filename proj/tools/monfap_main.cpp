// monfap: multi-face manipulation detector.
//
// Subcommands: gen-data (synthetic benchmark), train, eval, predict.
// Exit codes: 0 success, 2 invalid config or input, 3 checkpoint problems
// (missing file, shape mismatch).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "monfap/checkpoint.hpp"
#include "monfap/config.hpp"
#include "monfap/image_io.hpp"
#include "monfap/metrics.hpp"
#include "monfap/model.hpp"
#include "monfap/synth.hpp"
#include "monfap/trainer.hpp"

namespace {

using namespace monfap;

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitCheckpoint = 3;

struct CommonArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::int64_t seed = -1;  // <0: keep the config value
  bool deterministic = false;
};

// Config is resolved and range-checked before any command touches the
// filesystem.
RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_config(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.checkpoint_path.empty()) cfg.checkpoint_path = args.checkpoint_path;
  validate_config(cfg);
  return cfg;
}

std::uint64_t split_seed(const RunConfig& cfg, const std::string& split) {
  return Rng(cfg.seed).derive("split:" + split).seed();
}

int cmd_gen_data(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  SceneConfig scene = cfg.scene();
  const std::pair<const char*, int> splits[] = {
      {"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
  for (const auto& [name, count] : splits) {
    int n = build_split(cfg.data_root, name, count, scene, split_seed(cfg, name),
                        cfg.balanced);
    std::cout << "split=" << name << " count=" << n << " manifest="
              << (std::filesystem::path(cfg.data_root) / name / "manifest.txt").string()
              << "\n";
  }
  return kExitOk;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  std::vector<Sample> train_set;
  try {
    train_set = load_split(cfg.data_root, "train");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << " (run gen-data first)\n";
    return kExitBadInput;
  }
  if (train_set.empty()) {
    std::cerr << "error: train split is empty\n";
    return kExitBadInput;
  }

  Model model(cfg.model(), cfg.seed);
  TrainResult res = train_model(model, train_set, cfg, &std::cout);
  std::ofstream log(cfg.log_path, std::ios::binary | std::ios::trunc);
  log << res.log;
  if (!log) {
    std::cerr << "error: cannot write loss log: " << cfg.log_path << "\n";
    return 1;
  }
  if (res.aborted_non_finite) {
    std::cerr << "error: non-finite loss at iteration " << res.iterations_run + 1
              << "; keeping the last good checkpoint\n";
    return 1;
  }
  std::cout << "training_complete iterations=" << res.iterations_run
            << " checkpoint=" << cfg.checkpoint_path << "\n";
  return kExitOk;
}

// Builds the model the checkpoint was trained with. An explicit --config must
// agree with the stored arrays or loading reports the mismatched shapes.
Model model_from_checkpoint(const Checkpoint& ck, const RunConfig* override_cfg,
                            RunConfig& cfg_out) {
  RunConfig cfg = override_cfg ? *override_cfg : parse_config(ck.config_text);
  validate_config(cfg);
  Model model(cfg.model(), ck.seed);
  load_checkpoint(model.params, ck);
  cfg_out = cfg;
  return model;
}

int cmd_eval(const CommonArgs& args, const std::string& split_flag, bool perturb,
             bool oracle) {
  RunConfig flag_cfg;
  bool have_cfg = !args.config_path.empty();
  if (have_cfg) flag_cfg = resolve_config(args);

  std::string ck_path = !args.checkpoint_path.empty()
                            ? args.checkpoint_path
                            : (have_cfg ? flag_cfg.checkpoint_path
                                        : RunConfig{}.checkpoint_path);
  Checkpoint ck = read_checkpoint(ck_path);
  RunConfig cfg;
  Model model = model_from_checkpoint(ck, have_cfg ? &flag_cfg : nullptr, cfg);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!split_flag.empty()) cfg.eval_split = split_flag;
  validate_config(cfg);

  std::vector<Sample> samples = load_split(cfg.data_root, cfg.eval_split);
  EvalOptions opts;
  opts.perturb = perturb;
  opts.oracle = oracle;
  MetricsReport report = evaluate_model(model, samples, cfg, opts);
  std::cout << "split=" << cfg.eval_split << " perturbed=" << (perturb ? "true" : "false")
            << " samples=" << samples.size() << "\n"
            << report.serialize();
  return kExitOk;
}

int cmd_predict(const CommonArgs& args, const std::string& image_path,
                const std::string& out_dir) {
  RunConfig flag_cfg;
  bool have_cfg = !args.config_path.empty();
  if (have_cfg) flag_cfg = resolve_config(args);

  std::string ck_path = !args.checkpoint_path.empty()
                            ? args.checkpoint_path
                            : (have_cfg ? flag_cfg.checkpoint_path
                                        : RunConfig{}.checkpoint_path);
  Checkpoint ck = read_checkpoint(ck_path);
  RunConfig cfg;
  Model model = model_from_checkpoint(ck, have_cfg ? &flag_cfg : nullptr, cfg);

  RawImage img;
  try {
    img = read_png_rgb(image_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }

  Prediction pred = predict_image(model, img.rgb, img.h, img.w);
  double prob = pred.fake_probability;
  const std::vector<std::uint8_t>& mask = pred.mask;

  std::filesystem::create_directories(out_dir);
  std::string stem = std::filesystem::path(image_path).stem().string();
  std::filesystem::path base = std::filesystem::path(out_dir) / stem;

  char prob_str[32];
  std::snprintf(prob_str, sizeof prob_str, "%.9g", prob);
  std::ofstream sidecar(base.string() + "_prob.txt", std::ios::binary);
  sidecar << "fake_probability=" << prob_str << "\n";
  if (!sidecar) {
    std::cerr << "error: cannot write " << base.string() + "_prob.txt" << "\n";
    return 1;
  }

  write_png_mask(base.string() + "_mask.png", mask, img.h, img.w);

  // Overlay: predicted-fake pixels tinted red on the input.
  std::vector<double> overlay = img.rgb;
  size_t hw = static_cast<size_t>(img.h) * img.w;
  for (size_t p = 0; p < hw; ++p) {
    if (!mask[p]) continue;
    overlay[p] = 0.5 * overlay[p] + 0.5;
    overlay[hw + p] *= 0.5;
    overlay[2 * hw + p] *= 0.5;
  }
  write_png_rgb(base.string() + "_overlay.png", overlay, img.h, img.w);

  std::cout << "image=" << image_path << " fake_probability=" << prob_str
            << " mask=" << base.string() + "_mask.png"
            << " overlay=" << base.string() + "_overlay.png" << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monfap: multi-face manipulation detection and localization"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string eval_split, image_path, out_dir = "predictions";
  bool perturb = false, oracle = false;

  auto add_common = [&](CLI::App* sub, bool with_checkpoint = true) {
    sub->add_option("--config", common.config_path, "config file (key=value lines)");
    sub->add_option("--seed", common.seed, "override run.seed");
    if (with_checkpoint)
      sub->add_option("--checkpoint", common.checkpoint_path, "checkpoint path");
    sub->add_flag("--deterministic", common.deterministic,
                  "single-threaded bit-reproducible mode (always on in this build)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark");
  add_common(gen, false);

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval);
  eval->add_option("--split", eval_split, "split to evaluate (train/val/test)");
  eval->add_flag("--perturb", perturb, "apply the perturbation suite");
  eval->add_flag("--oracle", oracle, "score ground truth as predictions (sanity hook)");

  CLI::App* predict = app.add_subcommand("predict", "predict one image");
  add_common(predict);
  predict->add_option("--image", image_path, "input PNG")->required();
  predict->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common);
    if (train->parsed()) return cmd_train(common);
    if (eval->parsed()) return cmd_eval(common, eval_split, perturb, oracle);
    if (predict->parsed()) return cmd_predict(common, image_path, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
