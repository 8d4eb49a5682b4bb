#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "monfap/nn.hpp"

namespace monfap {

// Binary checkpoint container: seed, config echo, and every named parameter
// array with its shape, all little-endian float64. Writes go through a
// temporary file and an atomic rename so an interrupted save never clobbers
// the previous checkpoint.

struct CheckpointArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<CheckpointArray> arrays;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& config_text, std::uint64_t seed);

Checkpoint read_checkpoint(const std::string& path);

// Copies checkpoint arrays into the store; any missing, extra, or
// shape-mismatched entry raises CheckpointError naming the parameter and both
// shapes.
void load_checkpoint(ParamStore& params, const Checkpoint& ck);

}  // namespace monfap
