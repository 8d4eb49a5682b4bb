#include "monfap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "monfap/image_io.hpp"

namespace monfap {

namespace {

struct Ellipse {
  double cx, cy, rx, ry;
};

// s is the normalized radial coordinate (1 at the boundary), band its width.
double soft_alpha(double s, double band) {
  if (s <= 1.0 - band) return 1.0;
  if (s >= 1.0) return 0.0;
  return (1.0 - s) / band;
}

double radial(const Ellipse& e, int x, int y) {
  double dx = (x - e.cx) / e.rx, dy = (y - e.cy) / e.ry;
  return std::sqrt(dx * dx + dy * dy);
}

void bbox(const Ellipse& e, int h, int w, int& x0, int& x1, int& y0, int& y1) {
  x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx - 1)));
  x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + e.rx + 1)));
  y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry - 1)));
  y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + e.ry + 1)));
}

// Composites a flat-colored ellipse; per-pixel luminance noise when amp > 0.
// Draw order is scan-line deterministic.
void paint_ellipse(std::vector<double>& img, int h, int w, const Ellipse& e,
                   const double color[3], double noise_amp, double edge_px,
                   Rng& rng) {
  int x0, x1, y0, y1;
  bbox(e, h, w, x0, x1, y0, y1);
  double band = std::min(0.9, edge_px / std::min(e.rx, e.ry));
  size_t hw = static_cast<size_t>(h) * w;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double a = soft_alpha(radial(e, x, y), band);
      if (a <= 1e-6) continue;
      double nz = noise_amp > 0 ? noise_amp * (2.0 * rng.uniform() - 1.0) : 0.0;
      size_t p = static_cast<size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c)
        img[c * hw + p] = (1.0 - a) * img[c * hw + p] + a * (color[c] + nz);
    }
}

std::vector<double> gaussian_kernel(double sigma, int& radius) {
  radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with replicated edges, all three planes.
void gaussian_blur(std::vector<double>& rgb, int h, int w, double sigma) {
  int r;
  std::vector<double> k = gaussian_kernel(sigma, r);
  size_t hw = static_cast<size_t>(h) * w;
  std::vector<double> tmp(hw);
  for (int c = 0; c < 3; ++c) {
    double* plane = rgb.data() + c * hw;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += k[i + r] * plane[y * w + std::clamp(x + i, 0, w - 1)];
        tmp[y * w + x] = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += k[i + r] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
        plane[y * w + x] = acc;
      }
  }
}

// Swaps the face interior for a chroma-noise texture, smooths it with a
// sigma=1.5 Gaussian that samples interior pixels only, and composites through
// the soft blend band. Marks exactly the composited pixels in the mask.
void tamper_face(std::vector<double>& img, std::vector<std::uint8_t>& mask, int h,
                 int w, const Ellipse& e, double blend_px, Rng& rng) {
  int x0, x1, y0, y1;
  bbox(e, h, w, x0, x1, y0, y1);
  int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
  size_t hw = static_cast<size_t>(h) * w;

  double color[3], amp = 0;
  for (double& c : color) c = rng.uniform(0.15, 0.9);
  amp = rng.uniform(0.10, 0.16);

  std::vector<double> tex(3 * static_cast<size_t>(bw) * bh, 0.0);
  std::vector<std::uint8_t> inside(static_cast<size_t>(bw) * bh, 0);
  for (int y = 0; y < bh; ++y)
    for (int x = 0; x < bw; ++x) {
      if (radial(e, x0 + x, y0 + y) >= 1.0) continue;
      size_t q = static_cast<size_t>(y) * bw + x;
      inside[q] = 1;
      for (int c = 0; c < 3; ++c)
        tex[c * bw * bh + q] = color[c] + amp * (2.0 * rng.uniform() - 1.0);
    }

  const double sigma = 1.5;
  int r;
  std::vector<double> k = gaussian_kernel(sigma, r);
  std::vector<double> smooth(tex.size(), 0.0);
  for (int y = 0; y < bh; ++y)
    for (int x = 0; x < bw; ++x) {
      size_t q = static_cast<size_t>(y) * bw + x;
      if (!inside[q]) continue;
      double acc[3] = {0, 0, 0}, wsum = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= bh || xx < 0 || xx >= bw) continue;
          size_t qq = static_cast<size_t>(yy) * bw + xx;
          if (!inside[qq]) continue;
          double g = k[dy + r] * k[dx + r];
          wsum += g;
          for (int c = 0; c < 3; ++c) acc[c] += g * tex[c * bw * bh + qq];
        }
      for (int c = 0; c < 3; ++c) smooth[c * bw * bh + q] = acc[c] / wsum;
    }

  double band = std::min(0.9, blend_px / std::min(e.rx, e.ry));
  for (int y = 0; y < bh; ++y)
    for (int x = 0; x < bw; ++x) {
      double a = soft_alpha(radial(e, x0 + x, y0 + y), band);
      if (a <= 1e-6) continue;
      size_t q = static_cast<size_t>(y) * bw + x;
      size_t p = static_cast<size_t>(y0 + y) * w + (x0 + x);
      for (int c = 0; c < 3; ++c)
        img[c * hw + p] = (1.0 - a) * img[c * hw + p] + a * smooth[c * bw * bh + q];
      mask[p] = 1;
    }
}

void validate_scene(const SceneConfig& cfg) {
  if (cfg.h <= 0 || cfg.w <= 0 || cfg.h % 32 != 0 || cfg.w % 32 != 0)
    throw std::invalid_argument("SceneConfig: image size must be divisible by 32");
  if (cfg.faces_min < 2 || cfg.faces_max > 6 || cfg.faces_min > cfg.faces_max)
    throw std::invalid_argument("SceneConfig: faces range must lie within [2, 6]");
  if (cfg.tamper_prob < 0 || cfg.tamper_prob > 1)
    throw std::invalid_argument("SceneConfig: tamper probability must be in [0, 1]");
  if (cfg.blend_softness <= 0)
    throw std::invalid_argument("SceneConfig: blend softness must be positive");
}

}  // namespace

SceneResult generate_sample(const SceneConfig& cfg, std::uint64_t seed,
                            ForceLabel force) {
  validate_scene(cfg);
  const int h = cfg.h, w = cfg.w;
  const size_t hw = static_cast<size_t>(h) * w;
  Rng scene = Rng(seed).derive("scene");

  // Background: gradient + sinusoid + per-pixel luminance noise.
  std::vector<double> img(3 * hw, 0.0);
  double base[3], phase[3];
  for (double& b : base) b = scene.uniform(0.25, 0.70);
  double gx = scene.uniform(-1, 1), gy = scene.uniform(-1, 1);
  double gn = std::hypot(gx, gy);
  if (gn < 1e-9) {
    gx = 1;
    gy = 0;
  } else {
    gx /= gn;
    gy /= gn;
  }
  double gamp = scene.uniform(0.05, 0.15);
  double fx = scene.uniform(1.0, 3.0), fy = scene.uniform(1.0, 3.0);
  double samp = scene.uniform(0.02, 0.07);
  for (double& p : phase) p = scene.uniform(0.0, 2.0 * std::numbers::pi);
  double namp = scene.uniform(0.01, 0.03);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t p = static_cast<size_t>(y) * w + x;
      double g = gamp * ((2.0 * x / (w - 1) - 1.0) * gx + (2.0 * y / (h - 1) - 1.0) * gy);
      double nz = namp * (2.0 * scene.uniform() - 1.0);
      for (int c = 0; c < 3; ++c) {
        double sv = samp * std::sin(2.0 * std::numbers::pi *
                                        (fx * x / w + fy * y / h) +
                                    phase[c]);
        img[c * hw + p] = base[c] + g + sv + nz;
      }
    }

  // Face placement: rejection sampling with a disjointness margin; running out
  // of retries stops placement early rather than failing the sample.
  SceneResult out;
  out.faces_requested = scene.uniform_int(cfg.faces_min, cfg.faces_max);
  double rlo = 0.09 * std::min(h, w), rhi = 0.16 * std::min(h, w);
  std::vector<Ellipse> faces;
  for (int f = 0; f < out.faces_requested; ++f) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
      Ellipse e;
      e.rx = scene.uniform(rlo, rhi);
      e.ry = e.rx * scene.uniform(1.05, 1.35);
      double mx = e.rx + cfg.blend_softness + 2, my = e.ry + cfg.blend_softness + 2;
      if (2 * mx >= w - 1 || 2 * my >= h - 1) continue;
      e.cx = scene.uniform(mx, w - 1 - mx);
      e.cy = scene.uniform(my, h - 1 - my);
      bool overlap = false;
      for (const Ellipse& o : faces) {
        double lim = std::max(e.rx, e.ry) + std::max(o.rx, o.ry) +
                     2 * cfg.blend_softness + 2;
        double dx = e.cx - o.cx, dy = e.cy - o.cy;
        if (dx * dx + dy * dy < lim * lim) overlap = true;
      }
      if (!overlap) {
        faces.push_back(e);
        placed = true;
      }
    }
    if (!placed) break;
  }
  out.faces_placed = static_cast<int>(faces.size());

  for (const Ellipse& e : faces) {
    double skin[3];
    skin[0] = scene.uniform(0.62, 0.85);
    skin[1] = skin[0] * scene.uniform(0.72, 0.85);
    skin[2] = skin[1] * scene.uniform(0.72, 0.90);
    paint_ellipse(img, h, w, e, skin, 0.03, 1.0, scene);
    double dark[3] = {skin[0] * 0.35, skin[1] * 0.35, skin[2] * 0.35};
    Ellipse eyeL{e.cx - 0.42 * e.rx, e.cy - 0.30 * e.ry, 0.16 * e.rx, 0.14 * e.ry};
    Ellipse eyeR{e.cx + 0.42 * e.rx, e.cy - 0.30 * e.ry, 0.16 * e.rx, 0.14 * e.ry};
    paint_ellipse(img, h, w, eyeL, dark, 0.0, 0.75, scene);
    paint_ellipse(img, h, w, eyeR, dark, 0.0, 0.75, scene);
    double lips[3] = {skin[0] * 0.80, skin[1] * 0.40, skin[2] * 0.45};
    Ellipse mouth{e.cx, e.cy + 0.45 * e.ry, 0.45 * e.rx, 0.14 * e.ry};
    paint_ellipse(img, h, w, mouth, lips, 0.0, 0.75, scene);
  }

  for (double& v : img) v = std::clamp(v, 0.0, 1.0);

  // Tamper decisions come from their own stream, and each face's tamper
  // texture from a per-index stream, so forcing a label or flipping one
  // decision never shifts the underlying scene.
  std::vector<char> tampered(faces.size(), 0);
  if (force != ForceLabel::kGenuine && !faces.empty()) {
    Rng labels = Rng(seed).derive("labels");
    bool any = false;
    for (size_t i = 0; i < faces.size(); ++i) {
      tampered[i] = labels.bernoulli(cfg.tamper_prob) ? 1 : 0;
      any = any || tampered[i];
    }
    if (force == ForceLabel::kManipulated && !any)
      tampered[labels.uniform_int(0, static_cast<int>(faces.size()) - 1)] = 1;
  }

  std::vector<std::uint8_t> mask(hw, 0);
  for (size_t i = 0; i < faces.size(); ++i) {
    if (!tampered[i]) continue;
    Rng trng = Rng(seed).derive("tamper").derive(static_cast<std::uint64_t>(i));
    tamper_face(img, mask, h, w, faces[i], cfg.blend_softness, trng);
    ++out.faces_tampered;
  }
  for (double& v : img) v = std::clamp(v, 0.0, 1.0);

  out.sample.image = Tensor::from_data({3, h, w}, img);
  out.sample.gt_mask = std::move(mask);
  out.sample.h = h;
  out.sample.w = w;
  out.sample.label = out.faces_tampered > 0 ? 1 : 0;
  out.sample.seed = seed;
  return out;
}

PerturbConfig parse_families(const std::string& csv, double intensity) {
  PerturbConfig cfg;
  cfg.color = cfg.edge = cfg.corruption = cfg.convolution = cfg.external = false;
  cfg.intensity = intensity;
  std::stringstream ss(csv);
  std::string item;
  int n = 0;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "color")
      cfg.color = true;
    else if (item == "edge")
      cfg.edge = true;
    else if (item == "corruption")
      cfg.corruption = true;
    else if (item == "convolution")
      cfg.convolution = true;
    else if (item == "external")
      cfg.external = true;
    else
      throw std::invalid_argument("unknown perturbation family: " + item);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("perturbation family list is empty");
  if (intensity < 0 || intensity > 1)
    throw std::invalid_argument("perturbation intensity must be in [0, 1]");
  return cfg;
}

std::string family_string(const PerturbConfig& cfg) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(cfg.color, "color");
  add(cfg.edge, "edge");
  add(cfg.corruption, "corruption");
  add(cfg.convolution, "convolution");
  add(cfg.external, "external");
  return s;
}

std::vector<double> perturb(const std::vector<double>& rgb, int h, int w,
                            const PerturbConfig& cfg, Rng& rng) {
  if (rgb.size() != 3 * static_cast<size_t>(h) * w)
    throw std::invalid_argument("perturb: buffer does not match image size");
  if (cfg.intensity <= 0) return rgb;

  const bool enabled[5] = {cfg.color, cfg.edge, cfg.corruption, cfg.convolution,
                           cfg.external};
  bool apply[5] = {};
  int n_enabled = 0, n_apply = 0;
  for (int i = 0; i < 5; ++i) n_enabled += enabled[i];
  if (n_enabled == 0) return rgb;
  for (int i = 0; i < 5; ++i) {
    apply[i] = enabled[i] && rng.bernoulli(0.5);
    n_apply += apply[i];
  }
  if (n_apply == 0) {
    // at least one family always fires; pick uniformly among the enabled ones
    int pick = rng.uniform_int(0, n_enabled - 1);
    for (int i = 0; i < 5; ++i)
      if (enabled[i] && pick-- == 0) apply[i] = true;
  }

  const double t = cfg.intensity;
  const size_t hw = static_cast<size_t>(h) * w;
  std::vector<double> img = rgb;

  if (apply[0]) {  // color: brightness, contrast, per-channel gain
    double bright = t * rng.uniform(-0.25, 0.25);
    double contrast = 1.0 + t * rng.uniform(-0.35, 0.35);
    for (int c = 0; c < 3; ++c) {
      double gain = 1.0 + t * rng.uniform(-0.15, 0.15);
      for (size_t p = 0; p < hw; ++p) {
        double& v = img[c * hw + p];
        v = ((v - 0.5) * contrast + 0.5 + bright) * gain;
      }
    }
  }
  if (apply[1]) {  // edge: unsharp masking against a sigma=1 blur
    double amount = t * rng.uniform(0.5, 2.0);
    std::vector<double> blurred = img;
    gaussian_blur(blurred, h, w, 1.0);
    for (size_t i = 0; i < img.size(); ++i)
      img[i] += amount * (img[i] - blurred[i]);
  }
  if (apply[2]) {  // corruption: Gaussian noise then blended block means
    double sigma = t * rng.uniform(0.02, 0.08);
    for (double& v : img) v += sigma * rng.normal();
    int block = 1 + static_cast<int>(std::lround(t * rng.uniform(1.0, 3.0)));
    double q = t * rng.uniform(0.3, 0.8);
    if (block > 1) {
      for (int c = 0; c < 3; ++c)
        for (int by = 0; by < h; by += block)
          for (int bx = 0; bx < w; bx += block) {
            int ye = std::min(h, by + block), xe = std::min(w, bx + block);
            double mean = 0;
            int cnt = (ye - by) * (xe - bx);
            for (int y = by; y < ye; ++y)
              for (int x = bx; x < xe; ++x) mean += img[c * hw + y * w + x];
            mean /= cnt;
            for (int y = by; y < ye; ++y)
              for (int x = bx; x < xe; ++x) {
                double& v = img[c * hw + y * w + x];
                v = (1.0 - q) * v + q * mean;
              }
          }
    }
  }
  if (apply[3]) {  // convolution: Gaussian or straight-line motion blur
    if (rng.bernoulli(0.5)) {
      gaussian_blur(img, h, w, std::max(0.3, t * rng.uniform(0.6, 1.8)));
    } else {
      int len = 1 + static_cast<int>(std::lround(t * rng.uniform(2.0, 6.0)));
      bool horiz = rng.bernoulli(0.5);
      if (len > 1) {
        std::vector<double> tmp(hw);
        for (int c = 0; c < 3; ++c) {
          double* plane = img.data() + c * hw;
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
              double acc = 0;
              for (int i = 0; i < len; ++i) {
                int yy = horiz ? y : std::clamp(y + i - len / 2, 0, h - 1);
                int xx = horiz ? std::clamp(x + i - len / 2, 0, w - 1) : x;
                acc += plane[yy * w + xx];
              }
              tmp[y * w + x] = acc / len;
            }
          std::copy(tmp.begin(), tmp.end(), plane);
        }
      }
    }
  }
  if (apply[4]) {  // external: semi-transparent occluder rectangle
    double scale = t * rng.uniform(0.15, 0.35);
    int ow = std::max(2, static_cast<int>(std::lround(scale * w)));
    int oh = std::max(2, static_cast<int>(std::lround(scale * h)));
    int x0 = rng.uniform_int(0, std::max(0, w - ow));
    int y0 = rng.uniform_int(0, std::max(0, h - oh));
    double color[3], opacity = 0;
    for (double& c : color) c = rng.uniform(0.0, 1.0);
    opacity = t * rng.uniform(0.3, 0.8);
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < std::min(h, y0 + oh); ++y)
        for (int x = x0; x < std::min(w, x0 + ow); ++x) {
          double& v = img[c * hw + static_cast<size_t>(y) * w + x];
          v = (1.0 - opacity) * v + opacity * color[c];
        }
  }

  for (double& v : img) v = std::clamp(v, 0.0, 1.0);
  return img;
}

int build_split(const std::string& root, const std::string& split, int count,
                const SceneConfig& cfg, std::uint64_t split_seed, bool balanced) {
  namespace fs = std::filesystem;
  if (count < 0) throw std::invalid_argument("build_split: count must be >= 0");
  fs::path dir = fs::path(root) / split;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec)
    throw std::runtime_error("cannot create dataset directories under " +
                             dir.string());

  std::ostringstream manifest;
  int short_placements = 0;
  for (int i = 0; i < count; ++i) {
    std::uint64_t seed = split_seed + static_cast<std::uint64_t>(i);
    ForceLabel force = ForceLabel::kNone;
    if (balanced)
      force = i % 2 == 0 ? ForceLabel::kGenuine : ForceLabel::kManipulated;
    SceneResult r = generate_sample(cfg, seed, force);
    char name[32];
    std::snprintf(name, sizeof name, "%05d.png", i);
    write_png_rgb((dir / "images" / name).string(), r.sample.image.value(), cfg.h,
                  cfg.w);
    write_png_mask((dir / "masks" / name).string(), r.sample.gt_mask, cfg.h, cfg.w);
    manifest << "index=" << i << " image=images/" << name << " mask=masks/" << name
             << " label=" << (r.sample.label ? "manipulated" : "genuine")
             << " seed=" << seed << "\n";
    if (r.faces_placed < r.faces_requested) ++short_placements;
  }

  std::ofstream mf(dir / "manifest.txt", std::ios::binary);
  mf << manifest.str();
  if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  if (short_placements > 0)
    std::fprintf(stderr, "note: %s: %d sample(s) placed fewer faces than requested\n",
                 (dir).string().c_str(), short_placements);
  return count;
}

std::vector<ManifestRecord> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path);
  std::vector<ManifestRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ManifestRecord rec;
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      size_t eq = tok.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("malformed manifest line in " + manifest_path +
                                 ": " + line);
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "index")
        rec.index = std::stoi(val);
      else if (key == "image")
        rec.image = val;
      else if (key == "mask")
        rec.mask = val;
      else if (key == "label") {
        if (val != "genuine" && val != "manipulated")
          throw std::runtime_error("unknown label '" + val + "' in " +
                                   manifest_path);
        rec.label = val == "manipulated" ? 1 : 0;
      }
      else if (key == "seed")
        rec.seed = std::stoull(val);
      else
        throw std::runtime_error("unknown manifest key '" + key + "' in " +
                                 manifest_path);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Sample> load_split(const std::string& root, const std::string& split) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(root) / split;
  std::vector<ManifestRecord> records = read_manifest((dir / "manifest.txt").string());
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const ManifestRecord& rec : records) {
    Sample s;
    s.image_path = (dir / rec.image).string();
    s.mask_path = (dir / rec.mask).string();
    RawImage img = read_png_rgb(s.image_path);
    int mh = 0, mw = 0;
    s.gt_mask = read_png_mask(s.mask_path, mh, mw);
    if (mh != img.h || mw != img.w)
      throw std::runtime_error("mask size differs from image size for " +
                               s.mask_path);
    s.image = Tensor::from_data({3, img.h, img.w}, img.rgb);
    s.h = img.h;
    s.w = img.w;
    s.label = rec.label;
    s.seed = rec.seed;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace monfap
