#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "monfap/nn.hpp"
#include "monfap/optimizer.hpp"

using namespace monfap;

TEST_CASE("poly schedule endpoints and midpoint") {
  ParamStore ps;
  ps.create("w", {1});
  OptimConfig cfg;
  cfg.lr = 0.00006;
  cfg.poly_power = 0.9;
  cfg.total_iterations = 500;
  AdamW opt(ps, cfg);

  CHECK(opt.lr_at(0) == doctest::Approx(0.00006).epsilon(1e-15));
  CHECK(opt.lr_at(250) ==
        doctest::Approx(0.00006 * std::pow(0.5, 0.9)).epsilon(1e-15));
  CHECK(opt.lr_at(500) == 0.0);
  CHECK(opt.lr_at(501) == 0.0);
  // strictly decreasing inside the schedule
  for (int i = 1; i <= 500; ++i) CHECK(opt.lr_at(i) < opt.lr_at(i - 1));
}

TEST_CASE("single step matches the hand-evaluated update") {
  ParamStore ps;
  Tensor w = ps.create("w", {2});
  w.value() = {0.5, -1.0};
  w.grad() = {0.2, -0.4};

  OptimConfig cfg;
  cfg.lr = 0.01;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 1e-8;
  cfg.weight_decay = 0.1;
  cfg.poly_power = 1.0;
  cfg.total_iterations = 10;
  AdamW opt(ps, cfg);
  opt.step(0);

  for (int i = 0; i < 2; ++i) {
    double g = (i == 0) ? 0.2 : -0.4;
    double p = (i == 0) ? 0.5 : -1.0;
    double m = (1 - 0.9) * g;
    double v = (1 - 0.999) * g * g;
    double mhat = m / (1 - 0.9);
    double vhat = v / (1 - 0.999);
    double expect = p - 0.01 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.1 * p);
    CHECK(w.value()[i] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("several steps track a reference Adam loop") {
  ParamStore ps;
  Tensor w = ps.create("w", {3});
  w.value() = {1.0, -2.0, 0.3};

  OptimConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.02;
  cfg.poly_power = 0.9;
  cfg.total_iterations = 20;
  AdamW opt(ps, cfg);

  std::vector<double> p = w.value(), m(3, 0.0), v(3, 0.0);
  for (int iter = 0; iter < 6; ++iter) {
    // deterministic pseudo-gradients
    std::vector<double> g(3);
    for (int i = 0; i < 3; ++i) g[i] = std::sin(iter + i) * (i + 1);
    w.grad() = g;
    opt.step(iter);

    double lr = cfg.lr * std::pow(1.0 - double(iter) / 20, 0.9);
    double bc1 = 1 - std::pow(cfg.beta1, iter + 1);
    double bc2 = 1 - std::pow(cfg.beta2, iter + 1);
    for (int i = 0; i < 3; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1 / (std::sqrt(v[i] / bc2) + cfg.eps) +
                    cfg.weight_decay * p[i]);
      CHECK(w.value()[i] == doctest::Approx(p[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("missing gradients leave only weight decay") {
  ParamStore ps;
  Tensor w = ps.create("w", {2});
  w.value() = {4.0, -8.0};

  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  cfg.poly_power = 1.0;
  cfg.total_iterations = 2;
  AdamW opt(ps, cfg);
  opt.step(0);

  CHECK(w.value()[0] == doctest::Approx(4.0 * (1 - 0.1 * 0.5)).epsilon(1e-15));
  CHECK(w.value()[1] == doctest::Approx(-8.0 * (1 - 0.1 * 0.5)).epsilon(1e-15));

  // without decay the parameter is frozen
  ParamStore ps2;
  Tensor w2 = ps2.create("w", {1});
  w2.value() = {1.5};
  cfg.weight_decay = 0.0;
  AdamW opt2(ps2, cfg);
  opt2.step(0);
  CHECK(w2.value()[0] == 1.5);
}
