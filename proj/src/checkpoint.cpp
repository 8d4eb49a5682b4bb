#include "monfap/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace monfap {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'N', 'F', 'A', 'P', 'C', '1'};

// Fixed little-endian layout, byte-swapped on big-endian hosts so checkpoints
// stay portable.

template <class T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<char*>(b), sizeof(T));
}

template <class T>
T get(const std::string& buf, size_t& off, const std::string& path) {
  if (off + sizeof(T) > buf.size())
    throw CheckpointError("truncated checkpoint: " + path);
  unsigned char b[sizeof(T)];
  std::memcpy(b, buf.data() + off, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  off += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::string get_bytes(const std::string& buf, size_t& off, size_t n,
                      const std::string& path) {
  if (off + n > buf.size()) throw CheckpointError("truncated checkpoint: " + path);
  std::string s = buf.substr(off, n);
  off += n;
  return s;
}

std::string shape_text(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& config_text, std::uint64_t seed) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, seed);
  put<std::uint64_t>(out, config_text.size());
  out += config_text;
  put<std::uint64_t>(out, params.count());
  for (const auto& [name, t] : params.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) put<std::int32_t>(out, d);
    for (double v : t.value()) put<double>(out, v);
  }

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("cannot write checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  size_t off = 0;
  if (get_bytes(buf, off, sizeof kMagic, path) != std::string(kMagic, sizeof kMagic))
    throw CheckpointError("not a checkpoint file: " + path);

  Checkpoint ck;
  ck.seed = get<std::uint64_t>(buf, off, path);
  auto cfg_len = get<std::uint64_t>(buf, off, path);
  ck.config_text = get_bytes(buf, off, cfg_len, path);
  auto n = get<std::uint64_t>(buf, off, path);
  ck.arrays.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    CheckpointArray a;
    auto name_len = get<std::uint32_t>(buf, off, path);
    a.name = get_bytes(buf, off, name_len, path);
    auto ndim = get<std::uint32_t>(buf, off, path);
    size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      int dim = get<std::int32_t>(buf, off, path);
      if (dim <= 0) throw CheckpointError("corrupt shape in checkpoint: " + path);
      a.shape.push_back(dim);
      numel *= static_cast<size_t>(dim);
    }
    a.data.resize(numel);
    for (size_t j = 0; j < numel; ++j) a.data[j] = get<double>(buf, off, path);
    ck.arrays.push_back(std::move(a));
  }
  if (off != buf.size())
    throw CheckpointError("trailing bytes in checkpoint: " + path);
  return ck;
}

void load_checkpoint(ParamStore& params, const Checkpoint& ck) {
  if (ck.arrays.size() != params.count())
    throw CheckpointError("checkpoint has " + std::to_string(ck.arrays.size()) +
                          " arrays but the model has " +
                          std::to_string(params.count()) + " parameters");
  for (const CheckpointArray& a : ck.arrays) {
    Tensor* t = params.find(a.name);
    if (!t)
      throw CheckpointError("checkpoint array '" + a.name +
                            "' has no matching model parameter");
    if (t->shape() != a.shape)
      throw CheckpointError("shape mismatch for '" + a.name + "': checkpoint " +
                            shape_text(a.shape) + " vs model " +
                            shape_text(t->shape()));
    t->value() = a.data;
  }
}

}  // namespace monfap
