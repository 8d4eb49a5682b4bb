// Python surface for the monfap core: scene synthesis, perturbations, config
// round-tripping, checkpoint IO, model inference, and the rank AUC metric.
// Arrays cross the boundary as contiguous float64/uint8 numpy buffers; images
// are channel-major [3,h,w] in [0,1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "monfap/checkpoint.hpp"
#include "monfap/config.hpp"
#include "monfap/metrics.hpp"
#include "monfap/model.hpp"
#include "monfap/synth.hpp"
#include "monfap/trainer.hpp"

namespace py = pybind11;
using namespace monfap;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.value().begin(), t.value().end(), out.mutable_data());
  return out;
}

py::array_t<std::uint8_t> mask_to_array(const std::vector<std::uint8_t>& mask, int h,
                                        int w) {
  py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w)});
  std::copy(mask.begin(), mask.end(), out.mutable_data());
  return out;
}

// Accepts [3,h,w] float64; copies into a planar buffer.
std::vector<double> image_buffer(const DoubleArray& img, int& h, int& w) {
  if (img.ndim() != 3 || img.shape(0) != 3)
    throw std::invalid_argument("image must have shape [3,h,w]");
  h = static_cast<int>(img.shape(1));
  w = static_cast<int>(img.shape(2));
  return std::vector<double>(img.data(), img.data() + img.size());
}

ForceLabel parse_force(const py::object& force) {
  if (force.is_none()) return ForceLabel::kNone;
  std::string s = py::cast<std::string>(force);
  if (s == "genuine") return ForceLabel::kGenuine;
  if (s == "manipulated") return ForceLabel::kManipulated;
  throw std::invalid_argument("force must be None, 'genuine', or 'manipulated'");
}

// Owns the model plus the config/seed it was built from so saves reproduce
// the original checkpoint layout.
struct ModelHandle {
  RunConfig cfg;
  std::uint64_t seed = 0;
  std::unique_ptr<Model> model;

  ModelHandle(const std::string& config_text, std::uint64_t seed_in) : seed(seed_in) {
    cfg = config_text.empty() ? RunConfig{} : parse_config(config_text);
    validate_config(cfg);
    model = std::make_unique<Model>(cfg.model(), seed);
  }

  explicit ModelHandle(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    cfg = parse_config(ck.config_text);
    validate_config(cfg);
    seed = ck.seed;
    model = std::make_unique<Model>(cfg.model(), seed);
    load_checkpoint(model->params, ck);
  }

  py::dict forward(const DoubleArray& img) const {
    int h = 0, w = 0;
    std::vector<double> buf = image_buffer(img, h, w);
    if (h % 32 || w % 32)
      throw std::invalid_argument("forward needs h and w divisible by 32; use predict for arbitrary sizes");
    NoGradGuard ng;
    Rng gate_rng(0);
    Model::Forward fwd =
        model->forward(Tensor::from_data({3, h, w}, std::move(buf)), false, gate_rng);
    py::dict out;
    out["y"] = tensor_to_array(fwd.y);
    out["m"] = tensor_to_array(fwd.m);
    py::list aux;
    for (const Tensor& a : fwd.aux_logits) aux.append(tensor_to_array(a));
    out["aux"] = std::move(aux);
    return out;
  }

  py::tuple predict(const DoubleArray& img) const {
    int h = 0, w = 0;
    std::vector<double> buf = image_buffer(img, h, w);
    Prediction p = predict_image(*model, buf, h, w);
    return py::make_tuple(p.fake_probability, mask_to_array(p.mask, h, w));
  }

  void save(const std::string& path) const {
    save_checkpoint(path, model->params, serialize_config(cfg), seed);
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    for (const auto& [name, t] : model->params.entries()) names.push_back(name);
    return names;
  }

  py::array_t<double> param(const std::string& name) const {
    for (const auto& [pname, t] : model->params.entries())
      if (pname == name) return tensor_to_array(t);
    throw std::out_of_range("no parameter named '" + name + "'");
  }
};

}  // namespace

PYBIND11_MODULE(_monfap, m) {
  m.doc() = "multi-face manipulation detection core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

  m.def("default_config", [] { return serialize_config(RunConfig{}); },
        "Serialized default run configuration.");

  m.def(
      "canonical_config",
      [](const std::string& text) {
        RunConfig cfg = parse_config(text);
        validate_config(cfg);
        return serialize_config(cfg);
      },
      py::arg("text"),
      "Parses, validates, and re-serializes a configuration; raises ConfigError "
      "on unknown keys, bad values, or out-of-range fields.");

  m.def(
      "generate_scene",
      [](std::uint64_t seed, int height, int width, int faces_min, int faces_max,
         double tamper_prob, double blend_softness, const py::object& force) {
        SceneConfig sc;
        sc.h = height;
        sc.w = width;
        sc.faces_min = faces_min;
        sc.faces_max = faces_max;
        sc.tamper_prob = tamper_prob;
        sc.blend_softness = blend_softness;
        SceneResult res = generate_sample(sc, seed, parse_force(force));
        py::dict out;
        out["image"] = tensor_to_array(res.sample.image);
        out["mask"] = mask_to_array(res.sample.gt_mask, res.sample.h, res.sample.w);
        out["label"] = res.sample.label;
        out["faces_placed"] = res.faces_placed;
        out["faces_tampered"] = res.faces_tampered;
        return out;
      },
      py::arg("seed"), py::arg("height") = 64, py::arg("width") = 64,
      py::arg("faces_min") = 2, py::arg("faces_max") = 3,
      py::arg("tamper_prob") = 0.35, py::arg("blend_softness") = 2.0,
      py::arg("force") = py::none(),
      "Renders one synthetic multi-face scene. Returns a dict with image "
      "[3,h,w], mask [h,w], label, and face counts.");

  m.def(
      "perturb",
      [](const DoubleArray& img, const std::string& families, double intensity,
         std::uint64_t seed) {
        int h = 0, w = 0;
        std::vector<double> buf = image_buffer(img, h, w);
        PerturbConfig pc = parse_families(families, intensity);
        Rng rng(seed);
        std::vector<double> out = perturb(buf, h, w, pc, rng);
        py::array_t<double> arr({static_cast<py::ssize_t>(3), static_cast<py::ssize_t>(h),
                                 static_cast<py::ssize_t>(w)});
        std::copy(out.begin(), out.end(), arr.mutable_data());
        return arr;
      },
      py::arg("image"), py::arg("families") = "color,edge,corruption,convolution,external",
      py::arg("intensity") = 0.5, py::arg("seed") = 0,
      "Applies a seeded degradation drawn from the enabled families; the label "
      "and mask semantics of the image are unchanged.");

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return auc_rank(scores, labels);
      },
      py::arg("scores"), py::arg("labels"),
      "Rank-based AUC with half-weight ties; None when labels are single-class.");

  m.def(
      "build_split",
      [](const std::string& root, const std::string& split, int count, int height,
         int width, std::uint64_t seed, bool balanced) {
        SceneConfig sc;
        sc.h = height;
        sc.w = width;
        return build_split(root, split, count, sc, seed, balanced);
      },
      py::arg("root"), py::arg("split"), py::arg("count"), py::arg("height") = 64,
      py::arg("width") = 64, py::arg("seed") = 0, py::arg("balanced") = true,
      "Writes a PNG dataset split plus manifest under root/<split>; returns the "
      "sample count.");

  py::class_<ModelHandle>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config") = "",
           py::arg("seed") = 42,
           "Fresh model from a configuration text (empty for defaults).")
      .def_static(
          "load", [](const std::string& path) { return ModelHandle(path); },
          py::arg("path"), "Restores a model and its configuration from a checkpoint.")
      .def("forward", &ModelHandle::forward, py::arg("image"),
           "Inference pass on a [3,h,w] image (h, w divisible by 32). Returns "
           "dict(y=[2], m=[2,h/4,w/4], aux=list of stage logits).")
      .def("predict", &ModelHandle::predict, py::arg("image"),
           "Arbitrary-size inference via reflect padding. Returns "
           "(fake_probability, mask[h,w]).")
      .def("save", &ModelHandle::save, py::arg("path"))
      .def("param_names", &ModelHandle::param_names)
      .def("param", &ModelHandle::param, py::arg("name"),
           "Copy of a named parameter array.")
      .def_property_readonly("seed", [](const ModelHandle& h) { return h.seed; })
      .def_property_readonly(
          "config", [](const ModelHandle& h) { return serialize_config(h.cfg); });
}
