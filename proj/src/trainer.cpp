#include "monfap/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "monfap/checkpoint.hpp"
#include "monfap/losses.hpp"
#include "monfap/optimizer.hpp"
#include "monfap/synth.hpp"

namespace monfap {

namespace {

Sample clone_sample(const Sample& s) {
  Sample c = s;
  c.image = Tensor::from_data(s.image.shape(), s.image.value());
  return c;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// One forward over a batch of samples; mone aggregates each level's gate
// decisions across the whole batch.
LossBundle batch_loss(const Model& model, const std::vector<const Sample*>& batch,
                      bool training, Rng& gate_rng, double lambda, double w_im) {
  std::vector<Tensor> y_batch, m_batch;
  std::vector<std::array<Tensor, 4>> aux_batch;
  std::array<std::vector<GateDecision>, 4> level_decisions;
  for (const Sample* s : batch) {
    Model::Forward fwd = model.forward(s->image, training, gate_rng);
    y_batch.push_back(fwd.y);
    m_batch.push_back(fwd.m);
    aux_batch.push_back(fwd.aux_logits);
    for (size_t l = 0; l < fwd.decisions.size(); ++l)
      level_decisions[l].push_back(fwd.decisions[l]);
  }
  Tensor mone;
  if (!level_decisions[0].empty()) {
    mone = importance_loss(level_decisions[0], w_im);
    for (size_t l = 1; l < 4; ++l)
      mone = add(mone, importance_loss(level_decisions[l], w_im));
  }
  return total_loss(y_batch, m_batch, aux_batch, mone, batch, lambda);
}

}  // namespace

TrainResult train_model(Model& model, const std::vector<Sample>& train_set,
                        const RunConfig& cfg, std::ostream* echo) {
  if (train_set.empty())
    throw std::invalid_argument("train_model: empty training set");

  Rng data_rng = Rng(cfg.seed).derive("data");
  Rng aug_rng = Rng(cfg.seed).derive("augment");
  Rng gate_rng = Rng(cfg.seed).derive("gate");

  OptimConfig oc;
  oc.lr = cfg.lr;
  oc.beta1 = cfg.beta1;
  oc.beta2 = cfg.beta2;
  oc.weight_decay = cfg.weight_decay;
  oc.poly_power = cfg.poly_power;
  oc.total_iterations = cfg.iterations;
  AdamW opt(model.params, oc);

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces a shuffle on first use

  TrainResult res;
  std::string config_echo = serialize_config(cfg);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<Sample> holders;
    std::vector<const Sample*> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        for (size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1],
                    order[static_cast<size_t>(data_rng.uniform_int(
                        0, static_cast<int>(i) - 1))]);
        cursor = 0;
      }
      const Sample& s = train_set[order[cursor++]];
      if (aug_rng.bernoulli(0.5)) {
        holders.push_back(clone_sample(s));
        flip_horizontal(holders.back());
      } else {
        holders.push_back(s);  // image tensor is shared, not copied
      }
    }
    for (const Sample& s : holders) batch.push_back(&s);

    LossBundle loss = batch_loss(model, batch, true, gate_rng, cfg.lambda,
                                 cfg.importance_weight);
    double total = loss.total.item();
    if (!std::isfinite(total)) {
      res.aborted_non_finite = true;
      std::string line = "iter=" + std::to_string(iter + 1) + " status=non_finite_loss\n";
      res.log += line;
      if (echo) *echo << line;
      break;
    }

    model.params.zero_grads();
    loss.total.backward();
    opt.step(iter);
    model.apply_projections();

    res.iterations_run = iter + 1;
    res.final_loss = total;
    if ((iter + 1) % cfg.log_every == 0 || iter + 1 == cfg.iterations) {
      std::string line = "iter=" + std::to_string(iter + 1) +
                         " lr=" + fmt(opt.lr_at(iter)) + " total=" + fmt(total) +
                         " img=" + fmt(loss.l_img.item()) +
                         " pix=" + fmt(loss.l_pix.item()) +
                         " aux=" + fmt(loss.l_aux.item()) +
                         " mone=" + fmt(loss.l_mone.defined() ? loss.l_mone.item() : 0.0) +
                         "\n";
      res.log += line;
      if (echo) *echo << line;
    }
    if ((iter + 1) % cfg.checkpoint_every == 0 || iter + 1 == cfg.iterations)
      save_checkpoint(cfg.checkpoint_path, model.params, config_echo, cfg.seed);
  }
  return res;
}

MetricsReport evaluate_model(const Model& model, const std::vector<Sample>& samples,
                             const RunConfig& cfg, const EvalOptions& opts) {
  NoGradGuard ng;
  MetricsReport report;
  if (samples.empty()) return report;

  PerturbConfig pc;
  if (opts.perturb)
    pc = parse_families(cfg.perturb_families, cfg.perturb_intensity);

  std::vector<std::array<double, 2>> logits;
  std::vector<int> labels;
  std::vector<std::vector<std::uint8_t>> pred_masks;
  std::vector<const Sample*> batch;
  for (const Sample& s : samples) batch.push_back(&s);

  if (opts.oracle) {
    for (const Sample& s : samples) {
      logits.push_back(s.label ? std::array<double, 2>{-10.0, 10.0}
                               : std::array<double, 2>{10.0, -10.0});
      labels.push_back(s.label);
      pred_masks.push_back(s.gt_mask);
    }
  } else {
    std::vector<Sample> holders;
    holders.reserve(samples.size());
    std::vector<Tensor> y_batch, m_batch;
    std::vector<std::array<Tensor, 4>> aux_batch;
    std::array<std::vector<GateDecision>, 4> level_decisions;
    Rng gate_rng(0);  // eval never draws gate noise
    for (size_t i = 0; i < samples.size(); ++i) {
      const Sample& s = samples[i];
      if (opts.perturb && cfg.perturb_intensity > 0) {
        Rng prng = Rng(cfg.seed).derive("perturb").derive(static_cast<std::uint64_t>(i));
        holders.push_back(clone_sample(s));
        holders.back().image = Tensor::from_data(
            s.image.shape(), perturb(s.image.value(), s.h, s.w, pc, prng));
      } else {
        holders.push_back(s);
      }
      Model::Forward fwd = model.forward(holders.back().image, false, gate_rng);
      logits.push_back({fwd.y.value()[0], fwd.y.value()[1]});
      labels.push_back(s.label);
      pred_masks.push_back(predict_mask_full(fwd.m));
      y_batch.push_back(fwd.y);
      m_batch.push_back(fwd.m);
      aux_batch.push_back(fwd.aux_logits);
      for (size_t l = 0; l < fwd.decisions.size(); ++l)
        level_decisions[l].push_back(fwd.decisions[l]);
    }
    Tensor mone;
    if (!level_decisions[0].empty()) {
      mone = importance_loss(level_decisions[0], cfg.importance_weight);
      for (size_t l = 1; l < 4; ++l)
        mone = add(mone, importance_loss(level_decisions[l], cfg.importance_weight));
    }
    LossBundle loss =
        total_loss(y_batch, m_batch, aux_batch, mone, batch, cfg.lambda);
    report.loss_total = loss.total.item();
    report.loss_img = loss.l_img.item();
    report.loss_pix = loss.l_pix.item();
    report.loss_aux = loss.l_aux.item();
    report.loss_mone = loss.l_mone.defined() ? loss.l_mone.item() : 0.0;
  }

  DetectionScores det = detection_metrics(logits, labels);
  report.acc = det.acc;
  report.auc = det.auc;
  if (auto loc = localization_metrics(pred_masks, batch, cfg.eval_macro)) {
    report.f1_f = loc->f1;
    report.iou_f = loc->iou;
  }
  return report;
}

namespace {

// Index into [0, n) reflected without repeating the edge sample.
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Prediction predict_image(const Model& model, const std::vector<double>& rgb, int h,
                         int w) {
  if (h <= 0 || w <= 0 || rgb.size() != 3ull * h * w)
    throw std::invalid_argument("predict_image: rgb size does not match 3*h*w");
  int ph = (h + 31) / 32 * 32, pw = (w + 31) / 32 * 32;
  std::vector<double> padded(3ull * ph * pw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        padded[(static_cast<size_t>(c) * ph + y) * pw + x] =
            rgb[(static_cast<size_t>(c) * h + mirror_index(y, h)) * w +
                mirror_index(x, w)];

  NoGradGuard ng;
  Rng gate_rng(0);
  Model::Forward fwd =
      model.forward(Tensor::from_data({3, ph, pw}, std::move(padded)), false, gate_rng);

  Prediction out;
  out.fake_probability = fake_probability({fwd.y.value()[0], fwd.y.value()[1]});
  std::vector<std::uint8_t> mask_full = predict_mask_full(fwd.m);
  out.mask.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.mask[static_cast<size_t>(y) * w + x] =
          mask_full[static_cast<size_t>(y) * pw + x];
  return out;
}

}  // namespace monfap
