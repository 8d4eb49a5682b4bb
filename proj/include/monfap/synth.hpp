#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monfap/rng.hpp"
#include "monfap/sample.hpp"

namespace monfap {

// Procedural multi-face forgery benchmark. Scenes are textured backgrounds
// with non-overlapping ellipse "faces" (eye and mouth blobs); a tampered face
// gets its interior swapped for a statistically distinct texture, smoothed
// with a sigma=1.5 Gaussian, and composited through a soft blend band. The
// ground-truth mask covers every modified pixel, so genuine and manipulated
// renders of the same scene seed are pixel-exact outside it.

struct SceneConfig {
  int h = 64, w = 64;             // divisible by 32
  int faces_min = 2, faces_max = 3;
  double tamper_prob = 0.35;      // per face
  double blend_softness = 2.0;    // blend band width, pixels
  int placement_retries = 64;     // per face before giving up
};

enum class ForceLabel { kNone, kGenuine, kManipulated };

struct SceneResult {
  Sample sample;
  int faces_requested = 0;
  int faces_placed = 0;   // < requested when placement ran out of retries
  int faces_tampered = 0;
};

SceneResult generate_sample(const SceneConfig& cfg, std::uint64_t seed,
                            ForceLabel force = ForceLabel::kNone);

// Real-world degradation suite applied at evaluation time. Never touches the
// mask or label.
struct PerturbConfig {
  bool color = true;        // brightness/contrast/hue jitter
  bool edge = true;         // unsharp masking
  bool corruption = true;   // additive Gaussian noise + block quantization
  bool convolution = true;  // Gaussian or motion blur
  bool external = true;     // semi-transparent occluder patch
  double intensity = 0.5;   // in [0,1]; 0 leaves the image untouched
};

// Comma-separated family list ("color,edge,..."); throws on unknown names.
PerturbConfig parse_families(const std::string& csv, double intensity);
std::string family_string(const PerturbConfig& cfg);

// Applies a random non-empty subset of the enabled families; output clipped
// to [0,1]. rgb is planar 3*h*w.
std::vector<double> perturb(const std::vector<double>& rgb, int h, int w,
                            const PerturbConfig& cfg, Rng& rng);

// Writes root/<split>/{images,masks}/NNNNN.png plus root/<split>/manifest.txt
// (one key=value record per line). Per-sample seed is split_seed + index so
// generation is reproducible and splits with distinct seeds are disjoint.
// balanced alternates forced genuine/manipulated labels instead of sampling
// them. Returns the number of samples written.
int build_split(const std::string& root, const std::string& split, int count,
                const SceneConfig& cfg, std::uint64_t split_seed, bool balanced);

struct ManifestRecord {
  int index = 0;
  std::string image, mask;  // paths relative to the split directory
  int label = 0;
  std::uint64_t seed = 0;
};

std::vector<ManifestRecord> read_manifest(const std::string& manifest_path);

// Loads every record of root/<split>/manifest.txt into memory.
std::vector<Sample> load_split(const std::string& root, const std::string& split);

}  // namespace monfap
