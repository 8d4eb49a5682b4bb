#include "monfap/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace monfap {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One visitor drives parsing, serialization, and the key listing so the three
// can never drift apart.
template <class F>
void for_each_field(RunConfig& c, F&& f) {
  f("model.channels", c.channels);
  f("model.top_k", c.top_k);
  f("model.importance_weight", c.importance_weight);
  f("model.lambda", c.lambda);
  f("model.theta", c.theta);
  f("model.mask_threshold", c.mask_threshold);
  f("model.heads", c.heads);
  f("model.use_mnm", c.use_mnm);
  f("model.positional_encoding", c.positional_encoding);
  f("optim.lr", c.lr);
  f("optim.beta1", c.beta1);
  f("optim.beta2", c.beta2);
  f("optim.weight_decay", c.weight_decay);
  f("optim.poly_power", c.poly_power);
  f("optim.iterations", c.iterations);
  f("optim.batch_size", c.batch_size);
  f("train.log_every", c.log_every);
  f("train.checkpoint_every", c.checkpoint_every);
  f("train.log_path", c.log_path);
  f("data.root", c.data_root);
  f("data.height", c.height);
  f("data.width", c.width);
  f("data.n_train", c.n_train);
  f("data.n_val", c.n_val);
  f("data.n_test", c.n_test);
  f("data.faces_min", c.faces_min);
  f("data.faces_max", c.faces_max);
  f("data.tamper_prob", c.tamper_prob);
  f("data.blend_softness", c.blend_softness);
  f("data.balanced", c.balanced);
  f("perturb.families", c.perturb_families);
  f("perturb.intensity", c.perturb_intensity);
  f("eval.split", c.eval_split);
  f("eval.macro", c.eval_macro);
  f("run.seed", c.seed);
  f("run.checkpoint", c.checkpoint_path);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& val) {
  throw ConfigError("invalid value for config key " + key + ": '" + val + "'");
}

void assign(const std::string& key, const std::string& val, int& out) {
  char* end = nullptr;
  long v = std::strtol(val.c_str(), &end, 10);
  if (val.empty() || *end != '\0') bad_value(key, val);
  out = static_cast<int>(v);
}

void assign(const std::string& key, const std::string& val, double& out) {
  char* end = nullptr;
  double v = std::strtod(val.c_str(), &end);
  if (val.empty() || *end != '\0') bad_value(key, val);
  out = v;
}

void assign(const std::string& key, const std::string& val, bool& out) {
  if (val == "true")
    out = true;
  else if (val == "false")
    out = false;
  else
    bad_value(key, val);
}

void assign(const std::string& key, const std::string& val, std::uint64_t& out) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(val.c_str(), &end, 10);
  if (val.empty() || *end != '\0') bad_value(key, val);
  out = v;
}

void assign(const std::string&, const std::string& val, std::string& out) {
  out = val;
}

std::string render(int v) { return std::to_string(v); }
std::string render(double v) { return fmt_double(v); }
std::string render(bool v) { return v ? "true" : "false"; }
std::string render(std::uint64_t v) { return std::to_string(v); }
std::string render(const std::string& v) { return v; }

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line (expected key=value): " + line);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    bool found = false;
    for_each_field(cfg, [&](const char* name, auto& field) {
      if (found || key != name) return;
      assign(key, val, field);
      found = true;
    });
    if (!found) throw ConfigError("unknown config key: " + key);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for_each_field(const_cast<RunConfig&>(cfg), [&](const char* name, auto& field) {
    out += name;
    out += '=';
    out += render(field);
    out += '\n';
  });
  return out;
}

void validate_config(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.channels < 1) fail("model.channels must be >= 1");
  if (cfg.top_k < 1 || cfg.top_k > 4) fail("model.top_k must be in [1, 4]");
  if (cfg.importance_weight < 0) fail("model.importance_weight must be >= 0");
  if (cfg.lambda <= 0) fail("model.lambda must be > 0");
  if (cfg.theta < 0 || cfg.theta > 1) fail("model.theta must be in [0, 1]");
  if (cfg.mask_threshold <= 0 || cfg.mask_threshold >= 1)
    fail("model.mask_threshold must be in (0, 1)");
  if (cfg.heads < 0) fail("model.heads must be >= 0");
  if (cfg.heads > 0 && cfg.channels % cfg.heads != 0)
    fail("model.heads must divide model.channels (the narrowest stage width)");
  if (cfg.lr <= 0) fail("optim.lr must be > 0");
  if (cfg.beta1 < 0 || cfg.beta1 >= 1) fail("optim.beta1 must be in [0, 1)");
  if (cfg.beta2 < 0 || cfg.beta2 >= 1) fail("optim.beta2 must be in [0, 1)");
  if (cfg.weight_decay < 0) fail("optim.weight_decay must be >= 0");
  if (cfg.poly_power <= 0) fail("optim.poly_power must be > 0");
  if (cfg.iterations < 1) fail("optim.iterations must be >= 1");
  if (cfg.batch_size < 1) fail("optim.batch_size must be >= 1");
  if (cfg.log_every < 1) fail("train.log_every must be >= 1");
  if (cfg.checkpoint_every < 1) fail("train.checkpoint_every must be >= 1");
  if (cfg.log_path.empty()) fail("train.log_path must not be empty");
  if (cfg.data_root.empty()) fail("data.root must not be empty");
  if (cfg.height <= 0 || cfg.height % 32 != 0)
    fail("data.height must be a positive multiple of 32");
  if (cfg.width <= 0 || cfg.width % 32 != 0)
    fail("data.width must be a positive multiple of 32");
  if (cfg.n_train < 0) fail("data.n_train must be >= 0");
  if (cfg.n_val < 0) fail("data.n_val must be >= 0");
  if (cfg.n_test < 0) fail("data.n_test must be >= 0");
  if (cfg.faces_min < 2 || cfg.faces_max > 6 || cfg.faces_min > cfg.faces_max)
    fail("data.faces_min/data.faces_max must satisfy 2 <= min <= max <= 6");
  if (cfg.tamper_prob < 0 || cfg.tamper_prob > 1)
    fail("data.tamper_prob must be in [0, 1]");
  if (cfg.blend_softness <= 0) fail("data.blend_softness must be > 0");
  if (cfg.perturb_intensity < 0 || cfg.perturb_intensity > 1)
    fail("perturb.intensity must be in [0, 1]");
  try {
    parse_families(cfg.perturb_families, cfg.perturb_intensity);
  } catch (const std::exception& e) {
    fail(std::string("perturb.families: ") + e.what());
  }
  if (cfg.eval_split != "train" && cfg.eval_split != "val" &&
      cfg.eval_split != "test")
    fail("eval.split must be one of train, val, test");
  if (cfg.checkpoint_path.empty()) fail("run.checkpoint must not be empty");
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.c = channels;
  m.k = top_k;
  m.w_im = importance_weight;
  m.theta = theta;
  m.mask_threshold = mask_threshold;
  m.heads = heads;
  m.use_mnm = use_mnm;
  m.positional_encoding = positional_encoding;
  return m;
}

SceneConfig RunConfig::scene() const {
  SceneConfig s;
  s.h = height;
  s.w = width;
  s.faces_min = faces_min;
  s.faces_max = faces_max;
  s.tamper_prob = tamper_prob;
  s.blend_softness = blend_softness;
  return s;
}

}  // namespace monfap
