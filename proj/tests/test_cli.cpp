#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "monfap/image_io.hpp"
#include "monfap/rng.hpp"

using namespace monfap;
namespace fs = std::filesystem;

// End-to-end checks against the installed command-line binary; every run is
// confined to a scratch directory.

namespace {

struct RunOut {
  int code = -1;
  std::string out, err;
};

fs::path scratch() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "monfap_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunOut run(const std::string& args) {
  fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  std::string cmd = std::string(MONFAP_CLI_PATH) + " " + args + " >" +
                    out.string() + " 2>" + err.string();
  int rc = std::system(cmd.c_str());
  RunOut r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_config() {
  fs::path cfg = scratch() / "cfg.txt";
  std::ofstream f(cfg);
  f << "model.channels=4\n"
    << "optim.lr=0.0005\n"
    << "optim.iterations=4\n"
    << "optim.batch_size=2\n"
    << "train.log_every=2\n"
    << "train.checkpoint_every=4\n"
    << "train.log_path=" << (scratch() / "train_log.txt").string() << "\n"
    << "data.root=" << (scratch() / "data").string() << "\n"
    << "data.n_train=4\n"
    << "data.n_val=2\n"
    << "data.n_test=4\n"
    << "run.seed=21\n"
    << "run.checkpoint=" << (scratch() / "ck.bin").string() << "\n";
  return cfg;
}

}  // namespace

TEST_CASE("cli: full pipeline with stable artifacts") {
  fs::path cfg = write_config();

  RunOut missing = run("eval --config " + cfg.string() + " --split test");
  CHECK(missing.code == 3);  // no checkpoint yet
  CHECK(missing.err.find("checkpoint") != std::string::npos);

  RunOut gen = run("gen-data --config " + cfg.string());
  CHECK(gen.code == 0);
  CHECK(gen.out.find("split=train count=4") != std::string::npos);
  CHECK(gen.out.find("split=test count=4") != std::string::npos);
  std::string manifest = slurp(scratch() / "data" / "train" / "manifest.txt");
  CHECK_FALSE(manifest.empty());

  // regeneration rewrites the same bytes
  RunOut regen = run("gen-data --config " + cfg.string());
  CHECK(regen.code == 0);
  CHECK(slurp(scratch() / "data" / "train" / "manifest.txt") == manifest);

  RunOut train = run("train --config " + cfg.string());
  CHECK(train.code == 0);
  CHECK(train.out.find("training_complete iterations=4") != std::string::npos);
  CHECK(fs::exists(scratch() / "ck.bin"));
  CHECK(slurp(scratch() / "train_log.txt").find("iter=4 ") != std::string::npos);

  RunOut e1 = run("eval --config " + cfg.string() + " --split test");
  RunOut e2 = run("eval --config " + cfg.string() + " --split test");
  CHECK(e1.code == 0);
  CHECK(e1.out == e2.out);  // byte-identical reports
  CHECK(e1.out.find("split=test perturbed=false samples=4") != std::string::npos);
  for (const char* key : {"acc=", "auc=", "f1_f=", "iou_f=", "loss_total="})
    CHECK(e1.out.find(key) != std::string::npos);

  RunOut ep = run("eval --config " + cfg.string() + " --split test --perturb");
  CHECK(ep.code == 0);
  CHECK(ep.out.find("perturbed=true") != std::string::npos);

  // metric sanity hook scores ground truth as the prediction
  RunOut eo = run("eval --config " + cfg.string() + " --split test --oracle");
  CHECK(eo.code == 0);
  CHECK(eo.out.find("acc=1\n") != std::string::npos);
  CHECK(eo.out.find("auc=1\n") != std::string::npos);
  CHECK(eo.out.find("f1_f=1\n") != std::string::npos);
  CHECK(eo.out.find("iou_f=1\n") != std::string::npos);
}

TEST_CASE("cli: predict pads odd sizes and writes sidecars") {
  fs::path cfg = write_config();
  if (!fs::exists(scratch() / "ck.bin")) {
    REQUIRE(run("gen-data --config " + cfg.string()).code == 0);
    REQUIRE(run("train --config " + cfg.string()).code == 0);
  }

  // 70x50 image exercises the reflect-pad path (not a multiple of 32)
  std::vector<double> rgb(3 * 70 * 50);
  Rng rng(3);
  for (auto& v : rgb) v = rng.uniform();
  fs::path odd = scratch() / "odd.png";
  write_png_rgb(odd.string(), rgb, 70, 50);

  fs::path out = scratch() / "pred";
  RunOut p = run("predict --config " + cfg.string() + " --image " + odd.string() +
                 " --out " + out.string());
  CHECK(p.code == 0);
  CHECK(p.out.find("fake_probability=") != std::string::npos);

  std::string prob_text = slurp(out / "odd_prob.txt");
  double prob = std::strtod(prob_text.c_str() + prob_text.find('=') + 1, nullptr);
  CHECK(prob >= 0.0);
  CHECK(prob <= 1.0);

  int mh = 0, mw = 0;
  std::vector<std::uint8_t> mask = read_png_mask((out / "odd_mask.png").string(), mh, mw);
  CHECK(mh == 70);
  CHECK(mw == 50);
  RawImage overlay = read_png_rgb((out / "odd_overlay.png").string());
  CHECK(overlay.h == 70);
  CHECK(overlay.w == 50);

  RunOut noimg = run("predict --config " + cfg.string() + " --image " +
                     (scratch() / "nope.png").string() + " --out " + out.string());
  CHECK(noimg.code == 2);
}

TEST_CASE("cli: config errors name the field and exit 2") {
  fs::path bad = scratch() / "bad.txt";
  std::ofstream(bad) << "model.top_k=9\n";
  RunOut r = run("gen-data --config " + bad.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("model.top_k") != std::string::npos);

  std::ofstream(bad) << "model.mystery=1\n";
  RunOut unknown = run("train --config " + bad.string());
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("model.mystery") != std::string::npos);

  RunOut nocfg = run("train --config " + (scratch() / "ghost.txt").string());
  CHECK(nocfg.code == 2);

  RunOut nosub = run("");
  CHECK(nosub.code != 0);
}
