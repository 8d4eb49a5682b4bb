#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "monfap/synth.hpp"

using namespace monfap;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_root(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("monfap_synth_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int mask_area(const Sample& s) {
  int area = 0;
  for (auto v : s.gt_mask) area += v;
  return area;
}

}  // namespace

TEST_CASE("scene generation: determinism, ranges, label rules") {
  SceneConfig cfg;
  SceneResult a = generate_sample(cfg, 1234);
  SceneResult b = generate_sample(cfg, 1234);
  CHECK(a.sample.image.value() == b.sample.image.value());
  CHECK(a.sample.gt_mask == b.sample.gt_mask);
  CHECK(a.sample.label == b.sample.label);

  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    SceneResult r = generate_sample(cfg, seed);
    const Sample& s = r.sample;
    CHECK(s.h == cfg.h);
    CHECK(s.w == cfg.w);
    CHECK(s.image.dim(0) == 3);
    for (double v : s.image.value()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.faces_placed >= 1);
    CHECK(r.faces_placed <= r.faces_requested);
    CHECK(r.faces_requested >= cfg.faces_min);
    CHECK(r.faces_requested <= cfg.faces_max);
    int area = mask_area(s);
    if (s.label == 0) {
      CHECK(area == 0);
    } else {
      // tampered region is visible but never dominates the scene
      CHECK(area >= 1);
      CHECK(area <= s.h * s.w / 2);
    }
    for (auto v : s.gt_mask) CHECK((v == 0 || v == 1));
  }
}

TEST_CASE("tamper probability zero produces only genuine scenes") {
  SceneConfig cfg;
  cfg.tamper_prob = 0.0;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    SceneResult r = generate_sample(cfg, seed);
    CHECK(r.sample.label == 0);
    CHECK(r.faces_tampered == 0);
    CHECK(mask_area(r.sample) == 0);
  }
}

TEST_CASE("forced labels change pixels only inside the mask") {
  SceneConfig cfg;
  for (std::uint64_t seed = 50; seed < 62; ++seed) {
    SceneResult real = generate_sample(cfg, seed, ForceLabel::kGenuine);
    SceneResult fake = generate_sample(cfg, seed, ForceLabel::kManipulated);
    CHECK(real.sample.label == 0);
    CHECK(mask_area(real.sample) == 0);
    CHECK(fake.sample.label == 1);
    REQUIRE(mask_area(fake.sample) >= 1);

    const auto& pr = real.sample.image.value();
    const auto& pf = fake.sample.image.value();
    int hw = cfg.h * cfg.w;
    int changed_inside = 0;
    for (int i = 0; i < hw; ++i) {
      bool same = pr[i] == pf[i] && pr[hw + i] == pf[hw + i] &&
                  pr[2 * hw + i] == pf[2 * hw + i];
      if (fake.sample.gt_mask[i] == 0) {
        CHECK(same);
      } else if (!same) {
        ++changed_inside;
      }
    }
    CHECK(changed_inside >= 1);
  }
}

TEST_CASE("manipulated fraction tracks per-face tamper probability") {
  SceneConfig cfg;
  cfg.tamper_prob = 0.5;
  int n = 200, manipulated = 0;
  double expected = 0;
  for (int i = 0; i < n; ++i) {
    SceneResult r = generate_sample(cfg, 9000 + i);
    manipulated += r.sample.label;
    expected += 1.0 - std::pow(1.0 - cfg.tamper_prob, r.faces_placed);
  }
  expected /= n;
  double sigma = std::sqrt(expected * (1 - expected) / n);
  CHECK(std::abs(double(manipulated) / n - expected) <= 3 * sigma + 1e-12);
}

TEST_CASE("perturbation: intensity zero is identity, output stays bounded") {
  SceneConfig cfg;
  Sample s = generate_sample(cfg, 77).sample;
  const std::vector<double>& rgb = s.image.value();

  PerturbConfig off = parse_families("color,edge", 0.0);
  Rng rng(5);
  CHECK(perturb(rgb, s.h, s.w, off, rng) == rgb);

  PerturbConfig all = parse_families("color,edge,corruption,convolution,external", 0.9);
  Rng r1(6), r2(6);
  std::vector<double> p1 = perturb(rgb, s.h, s.w, all, r1);
  std::vector<double> p2 = perturb(rgb, s.h, s.w, all, r2);
  CHECK(p1 == p2);
  CHECK(p1 != rgb);
  for (double v : p1) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  CHECK_THROWS(parse_families("color,smudge", 0.5));
  PerturbConfig sub = parse_families("edge,external", 0.5);
  CHECK(family_string(sub) == "edge,external");
}

TEST_CASE("split building: manifest layout, balance, reproducibility") {
  fs::path root = temp_root("split");
  SceneConfig cfg;
  int wrote = build_split(root.string(), "train", 8, cfg, 31337, true);
  CHECK(wrote == 8);
  build_split(root.string(), "val", 2, cfg, 500, true);
  build_split(root.string(), "test", 4, cfg, 900, true);

  auto train = read_manifest((root / "train" / "manifest.txt").string());
  auto val = read_manifest((root / "val" / "manifest.txt").string());
  auto test = read_manifest((root / "test" / "manifest.txt").string());
  CHECK(train.size() == 8);
  CHECK(val.size() == 2);
  CHECK(test.size() == 4);

  for (size_t i = 0; i < train.size(); ++i) {
    CHECK(train[i].index == int(i));
    CHECK(train[i].seed == 31337 + i);
    CHECK(train[i].label == int(i % 2));  // balanced alternation
    CHECK(fs::exists(root / "train" / train[i].image));
    CHECK(fs::exists(root / "train" / train[i].mask));
  }

  // regeneration is byte-identical, manifest and pixels alike
  std::string manifest_before = read_file(root / "train" / "manifest.txt");
  std::string image_before = read_file(root / "train" / train[3].image);
  build_split(root.string(), "train", 8, cfg, 31337, true);
  CHECK(read_file(root / "train" / "manifest.txt") == manifest_before);
  CHECK(read_file(root / "train" / train[3].image) == image_before);

  std::vector<Sample> loaded = load_split(root.string(), "train");
  REQUIRE(loaded.size() == 8);
  for (const Sample& s : loaded) {
    CHECK(s.h == cfg.h);
    CHECK(s.w == cfg.w);
    CHECK(int(s.gt_mask.size()) == s.h * s.w);
    int area = mask_area(s);
    CHECK((s.label == 1 ? area > 0 : area == 0));
  }
  fs::remove_all(root);
}

TEST_CASE("manifest parsing rejects malformed records") {
  fs::path root = temp_root("badmanifest");
  fs::create_directories(root / "train");
  std::ofstream(root / "train" / "manifest.txt")
      << "index=0 image=images/00000.png mask=masks/00000.png label=weird seed=1\n";
  CHECK_THROWS(read_manifest((root / "train" / "manifest.txt").string()));
  CHECK_THROWS(read_manifest((root / "missing" / "manifest.txt").string()));
  fs::remove_all(root);
}
