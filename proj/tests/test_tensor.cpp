#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "monfap/rng.hpp"
#include "monfap/tensor.hpp"
#include "oracles.hpp"

using namespace monfap;
using monfap::testutil::grad_check;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (auto& v : t.value()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("elementwise ops match hand values and gradcheck") {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor s = random_tensor({1}, rng);

  auto run = [&](auto f) {
    auto r = grad_check([&] { return sum(f()); }, {a, b, s}, 1e-6);
    CHECK_MESSAGE(r.ok, r.detail);
  };
  run([&] { return add(a, b); });
  run([&] { return sub(a, b); });
  run([&] { return mul(a, b); });
  run([&] { return div(a, add_scalar(square(b), 1.0)); });
  run([&] { return mul(a, s); });
  run([&] { return div(a, add_scalar(square(s), 0.5)); });
  run([&] { return sub(s, a); });

  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  CHECK(add(x, Tensor::scalar(10.0)).value()[1] == doctest::Approx(12.0));
  CHECK(mul_scalar(x, 3.0).value()[0] == doctest::Approx(3.0));
}

TEST_CASE("unary ops gradcheck") {
  Rng rng(2);
  Tensor a = random_tensor({5}, rng);
  for (auto f : {+[](const Tensor& t) { return gelu(t); },
                 +[](const Tensor& t) { return sigmoid(t); },
                 +[](const Tensor& t) { return softplus(t); }}) {
    auto r = grad_check([&] { return sum(f(a)); }, {a}, 1e-6);
    CHECK_MESSAGE(r.ok, r.detail);
  }
  // softplus large-input branch stays finite
  Tensor big = Tensor::from_data({1}, {200.0});
  CHECK(softplus(big).item() == doctest::Approx(200.0));
}

TEST_CASE("matmul family matches oracle and gradcheck") {
  Rng rng(3);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  Tensor c = random_tensor({5, 4}, rng);

  Tensor ab = matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += a.value()[i * 4 + k] * b.value()[k * 5 + j];
      CHECK(ab.value()[i * 5 + j] == doctest::Approx(acc).epsilon(1e-12));
    }

  auto r1 = grad_check([&] { return sum(matmul(a, b)); }, {a, b}, 1e-6);
  CHECK_MESSAGE(r1.ok, r1.detail);
  auto r2 = grad_check([&] { return sum(matmul_nt(a, c)); }, {a, c}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);
  auto r3 = grad_check([&] { return sum(square(transpose2d(a))); }, {a}, 1e-6);
  CHECK_MESSAGE(r3.ok, r3.detail);

  // matmul_nt(a, c) == matmul(a, c^T)
  Tensor nt = matmul_nt(a, c);
  Tensor viaT = matmul(a, transpose2d(c));
  for (int i = 0; i < nt.size(); ++i)
    CHECK(nt.value()[i] == doctest::Approx(viaT.value()[i]).epsilon(1e-12));
}

TEST_CASE("linear / slicing / reshaping gradcheck") {
  Rng rng(4);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor w = random_tensor({2, 6}, rng);
  Tensor b = random_tensor({2}, rng);
  auto r = grad_check([&] { return sum(square(linear(x, w, b))); }, {x, w, b}, 1e-6);
  CHECK_MESSAGE(r.ok, r.detail);

  auto r2 = grad_check(
      [&] {
        auto left = slice_cols(x, 0, 3);
        auto right = slice_cols(x, 3, 6);
        return sum(square(concat_cols({right, left})));
      },
      {x}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);

  auto r3 = grad_check([&] { return sum(square(mean_rows(x))); }, {x}, 1e-6);
  CHECK_MESSAGE(r3.ok, r3.detail);

  Tensor fm = random_tensor({2, 3, 4}, rng);
  auto r4 = grad_check(
      [&] { return sum(square(unflatten_hw(flatten_hw(fm), 3, 4))); }, {fm}, 1e-6);
  CHECK_MESSAGE(r4.ok, r4.detail);
  // flatten/unflatten round-trips exactly
  Tensor rt = unflatten_hw(flatten_hw(fm), 3, 4);
  for (int i = 0; i < fm.size(); ++i) CHECK(rt.value()[i] == fm.value()[i]);
}

TEST_CASE("conv2d matches scalar oracle") {
  Rng rng(5);
  for (auto [cin, cout, h, w, k, stride, pad] :
       {std::tuple{2, 3, 6, 7, 3, 1, 1}, std::tuple{3, 4, 8, 8, 4, 4, 0},
        std::tuple{2, 2, 5, 5, 5, 1, 2}, std::tuple{1, 2, 6, 6, 2, 2, 0}}) {
    Tensor x = random_tensor({cin, h, w}, rng);
    Tensor kk = random_tensor({cout, cin, k, k}, rng);
    Tensor b = random_tensor({cout}, rng);
    Tensor y = conv2d(x, kk, b, stride, pad);
    std::vector<double> bias(b.value().begin(), b.value().end());
    auto ref = testutil::conv_oracle(x.value(), cin, h, w, kk.value(), cout, k, k,
                                     stride, pad, &bias);
    REQUIRE(y.value().size() == ref.size());
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d and depthwise gradcheck") {
  Rng rng(6);
  Tensor x = random_tensor({2, 5, 5}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  auto r = grad_check([&] { return sum(square(conv2d(x, k, b, 1, 1))); }, {x, k, b},
                      1e-6);
  CHECK_MESSAGE(r.ok, r.detail);

  auto r2 = grad_check([&] { return sum(square(conv2d(x, k, Tensor(), 2, 1))); },
                       {x, k}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);

  Tensor dk = random_tensor({2, 3, 3}, rng);
  auto r3 = grad_check([&] { return sum(square(depthwise_conv2d(x, dk, 1))); },
                       {x, dk}, 1e-6);
  CHECK_MESSAGE(r3.ok, r3.detail);

  // depthwise agrees with a block-diagonal full convolution
  Tensor kfull = Tensor::zeros({2, 2, 3, 3});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 9; ++i)
      kfull.value()[(c * 2 + c) * 9 + i] = dk.value()[c * 9 + i];
  Tensor y1 = depthwise_conv2d(x, dk, 1);
  Tensor y2 = conv2d(x, kfull, Tensor(), 1, 1);
  for (int i = 0; i < y1.size(); ++i)
    CHECK(y1.value()[i] == doctest::Approx(y2.value()[i]).epsilon(1e-12));
}

TEST_CASE("pooling, upsampling, normalization gradcheck") {
  Rng rng(7);
  Tensor x = random_tensor({3, 4, 4}, rng);
  auto r = grad_check([&] { return sum(square(global_avg_pool(x))); }, {x}, 1e-6);
  CHECK_MESSAGE(r.ok, r.detail);

  auto r2 = grad_check([&] { return sum(square(upsample_bilinear2x(x))); }, {x}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);
  // constant input stays constant under bilinear upsampling
  Tensor c = Tensor::full({1, 3, 3}, 2.5);
  Tensor up = upsample_bilinear2x(c);
  for (double v : up.value()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));

  Tensor g = random_tensor({3}, rng);
  Tensor be = random_tensor({3}, rng);
  auto r3 = grad_check([&] { return sum(square(layer_norm_channels(x, g, be))); },
                       {x, g, be}, 1e-5);
  CHECK_MESSAGE(r3.ok, r3.detail);

  Tensor rows = random_tensor({4, 6}, rng);
  Tensor g2 = random_tensor({6}, rng);
  Tensor b2 = random_tensor({6}, rng);
  auto r4 = grad_check([&] { return sum(square(layer_norm_rows(rows, g2, b2))); },
                       {rows, g2, b2}, 1e-5);
  CHECK_MESSAGE(r4.ok, r4.detail);
}

TEST_CASE("softmax variants: exact zeros and gradcheck") {
  Rng rng(8);
  Tensor x = random_tensor({2, 5}, rng);
  std::vector<double> bias(10, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  bias[1] = -inf;
  bias[7] = -inf;
  bias[8] = -inf;
  Tensor y = softmax_rows_biased(x, bias);
  CHECK(y.value()[1] == 0.0);
  CHECK(y.value()[7] == 0.0);
  CHECK(y.value()[8] == 0.0);
  double row0 = y.value()[0] + y.value()[2] + y.value()[3] + y.value()[4];
  CHECK(row0 == doctest::Approx(1.0).epsilon(1e-12));

  auto r = grad_check([&] { return sum(square(softmax_rows_biased(x, bias))); }, {x},
                      1e-6);
  CHECK_MESSAGE(r.ok, r.detail);

  Tensor v = random_tensor({4}, rng);
  std::vector<std::uint8_t> keep{1, 0, 1, 0};
  Tensor sm = softmax_masked(v, keep);
  CHECK(sm.value()[1] == 0.0);
  CHECK(sm.value()[3] == 0.0);
  CHECK(sm.value()[0] + sm.value()[2] == doctest::Approx(1.0).epsilon(1e-12));
  auto r2 = grad_check([&] { return sum(square(softmax_masked(v, keep))); }, {v}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);
}

TEST_CASE("losses: values and gradcheck") {
  Rng rng(9);
  Tensor logits = random_tensor({4, 2}, rng);
  std::vector<int> targets{0, 1, 1, 0};
  auto r = grad_check([&] { return cross_entropy_rows(logits, targets); }, {logits},
                      1e-6);
  CHECK_MESSAGE(r.ok, r.detail);

  Tensor zero = Tensor::zeros({1, 2});
  CHECK(cross_entropy_rows(zero, {0}).item() == doctest::Approx(std::log(2.0)));

  Tensor bl = random_tensor({6}, rng);
  std::vector<double> t{0, 1, 1, 0, 1, 0};
  auto r2 = grad_check([&] { return bce_with_logits(bl, t); }, {bl}, 1e-6);
  CHECK_MESSAGE(r2.ok, r2.detail);

  // reduction identities
  Tensor a = random_tensor({7}, rng);
  CHECK(mean(a).item() == doctest::Approx(sum(a).item() / 7.0).epsilon(1e-12));
}

TEST_CASE("backward accumulates through shared subexpressions") {
  Tensor x = Tensor::from_data({1}, {3.0}, true);
  Tensor y = mul(x, x);        // x^2
  Tensor z = add(y, mul(y, x));  // x^2 + x^3
  z.backward();
  CHECK(x.grad()[0] == doctest::Approx(2 * 3.0 + 3 * 9.0));
}

TEST_CASE("no-grad mode builds no graph") {
  Tensor x = Tensor::from_data({1}, {2.0}, true);
  {
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  Tensor y = mul(x, x);
  CHECK(y.requires_grad());
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = Rng(42).derive("gate");
  Rng d = Rng(42).derive("gate");
  CHECK(c.normal() == d.normal());
  Rng e = Rng(42).derive("data");
  CHECK(Rng(42).derive("gate").next_u64() != e.next_u64());

  // rough sanity on the normal draw
  Rng f(7);
  double m = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) m += f.normal();
  CHECK(std::abs(m / n) < 0.05);
}
