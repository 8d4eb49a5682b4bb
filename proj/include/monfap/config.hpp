#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "monfap/model.hpp"
#include "monfap/synth.hpp"

namespace monfap {

// Full run description: flat key=value text with dotted sections. Parsing is
// strict (unknown keys and malformed values are errors naming the key) and
// serialization round-trips every field losslessly, doubles included.

struct RunConfig {
  // model.*
  int channels = 16;
  int top_k = 4;
  double importance_weight = 0.1;
  double lambda = 10.0;
  double theta = 0.7;
  double mask_threshold = 0.5;
  int heads = 0;  // 0 = derive from width
  bool use_mnm = true;
  bool positional_encoding = false;
  // optim.*
  double lr = 0.00006;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double poly_power = 0.9;
  int iterations = 500;
  int batch_size = 8;
  // train.*
  int log_every = 10;
  int checkpoint_every = 100;
  std::string log_path = "train_log.txt";
  // data.*
  std::string data_root = "data";
  int height = 64;
  int width = 64;
  int n_train = 32;
  int n_val = 8;
  int n_test = 16;
  int faces_min = 2;
  int faces_max = 3;
  double tamper_prob = 0.35;
  double blend_softness = 2.0;
  bool balanced = true;
  // perturb.*
  std::string perturb_families = "color,edge,corruption,convolution,external";
  double perturb_intensity = 0.5;
  // eval.*
  std::string eval_split = "test";
  bool eval_macro = false;
  // run.*
  std::uint64_t seed = 42;
  std::string checkpoint_path = "checkpoint.bin";

  bool operator==(const RunConfig&) const = default;

  ModelConfig model() const;
  SceneConfig scene() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Throws ConfigError naming the offending key on unknown keys, unparsable
// values, or out-of-range fields.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

// Range checks shared by every command; throws ConfigError naming the field.
void validate_config(const RunConfig& cfg);

}  // namespace monfap
