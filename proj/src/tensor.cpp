#include "monfap/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace monfap {

namespace {

bool g_grad_enabled = true;

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::shared_ptr<Tensor::Impl> make_node(std::vector<int> shape) {
  auto n = std::make_shared<Tensor::Impl>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(shape_numel(n->shape)), Scalar{0});
  return n;
}

// Wires parents/backward only when grad mode is on and some input needs it.
Tensor finish(std::shared_ptr<Tensor::Impl> node, std::vector<Tensor> parents,
              std::function<void(Tensor::Impl&)> backward_fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

void Tensor::Impl::accumulate(const std::vector<Scalar>& g) {
  auto& dst = ensure_grad();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

std::vector<Scalar>& Tensor::Impl::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), Scalar{0});
  return grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), Scalar{0}, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, Scalar v, bool requires_grad) {
  auto n = std::make_shared<Impl>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(shape_numel(n->shape)), v);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<Scalar> data,
                         bool requires_grad) {
  check(shape_numel(shape) == static_cast<int>(data.size()),
        "from_data: shape/data size mismatch");
  auto n = std::make_shared<Impl>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Scalar Tensor::item() const {
  check(size() == 1, "item: tensor is not scalar");
  return impl_->value[0];
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), Scalar{0});
}

void Tensor::backward() const {
  check(defined() && size() == 1, "backward: root must be a scalar tensor");
  // Post-order DFS to get a reverse topological order.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::pair<Impl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Impl* p = node->parents[idx++].get();
      if (!seen.count(p) && !p->parents.empty()) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  impl_->ensure_grad()[0] = Scalar{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  check(a_scalar || b_scalar || a.shape() == b.shape(),
        "binary op: incompatible shapes " + shape_str(a.shape()) + " vs " +
            shape_str(b.shape()));
  const auto& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  auto node = make_node(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = node->value;
  const size_t n = ov.size();
  for (size_t i = 0; i < n; ++i) {
    const Scalar x = av[a_scalar ? 0 : i];
    const Scalar y = bv[b_scalar ? 0 : i];
    switch (op) {
      case BinOp::Add: ov[i] = x + y; break;
      case BinOp::Sub: ov[i] = x - y; break;
      case BinOp::Mul: ov[i] = x * y; break;
      case BinOp::Div: ov[i] = x / y; break;
    }
  }
  return finish(node, {a, b}, [a, b, a_scalar, b_scalar, op](Tensor::Impl& self) {
    const auto& g = self.grad;
    const auto& av = a.value();
    const auto& bv = b.value();
    if (a.requires_grad()) {
      auto& ga = a.get()->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) {
        const Scalar y = bv[b_scalar ? 0 : i];
        Scalar d = 0;
        switch (op) {
          case BinOp::Add: d = g[i]; break;
          case BinOp::Sub: d = g[i]; break;
          case BinOp::Mul: d = g[i] * y; break;
          case BinOp::Div: d = g[i] / y; break;
        }
        ga[a_scalar ? 0 : i] += d;
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.get()->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) {
        const Scalar x = av[a_scalar ? 0 : i];
        const Scalar y = bv[b_scalar ? 0 : i];
        Scalar d = 0;
        switch (op) {
          case BinOp::Add: d = g[i]; break;
          case BinOp::Sub: d = -g[i]; break;
          case BinOp::Mul: d = g[i] * x; break;
          case BinOp::Div: d = -g[i] * x / (y * y); break;
        }
        gb[b_scalar ? 0 : i] += d;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div); }

Tensor add_scalar(const Tensor& a, Scalar s) {
  auto node = make_node(a.shape());
  for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = a.value()[i] + s;
  return finish(node, {a}, [a](Tensor::Impl& self) {
    if (a.requires_grad()) a.get()->accumulate(self.grad);
  });
}

Tensor mul_scalar(const Tensor& a, Scalar s) {
  auto node = make_node(a.shape());
  for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = a.value()[i] * s;
  return finish(node, {a}, [a, s](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * s;
  });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, Scalar{-1}); }

// ---------------------------------------------------------------------------
// unary

Tensor gelu(const Tensor& a) {
  auto node = make_node(a.shape());
  static const Scalar inv_sqrt2 = Scalar{1} / std::sqrt(Scalar{2});
  for (size_t i = 0; i < node->value.size(); ++i) {
    const Scalar x = a.value()[i];
    node->value[i] = Scalar{0.5} * x * (Scalar{1} + std::erf(x * inv_sqrt2));
  }
  return finish(node, {a}, [a](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    static const Scalar inv_sqrt2pi = Scalar{1} / std::sqrt(Scalar{2} * M_PI);
    auto& ga = a.get()->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const Scalar x = a.value()[i];
      const Scalar cdf = Scalar{0.5} * (Scalar{1} + std::erf(x * inv_sqrt2));
      const Scalar pdf = std::exp(Scalar{-0.5} * x * x) * inv_sqrt2pi;
      ga[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

namespace {
Scalar sigmoid_s(Scalar x) {
  if (x >= 0) {
    const Scalar e = std::exp(-x);
    return Scalar{1} / (Scalar{1} + e);
  }
  const Scalar e = std::exp(x);
  return e / (Scalar{1} + e);
}
}  // namespace

Tensor sigmoid(const Tensor& a) {
  auto node = make_node(a.shape());
  for (size_t i = 0; i < node->value.size(); ++i)
    node->value[i] = sigmoid_s(a.value()[i]);
  return finish(node, {a}, [a, out = node.get()](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const Scalar y = out->value[i];
      ga[i] += self.grad[i] * y * (Scalar{1} - y);
    }
  });
}

Tensor softplus(const Tensor& a) {
  auto node = make_node(a.shape());
  for (size_t i = 0; i < node->value.size(); ++i) {
    const Scalar x = a.value()[i];
    node->value[i] = x > Scalar{30} ? x : std::log1p(std::exp(x));
  }
  return finish(node, {a}, [a](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      ga[i] += self.grad[i] * sigmoid_s(a.value()[i]);
  });
}

Tensor square(const Tensor& a) { return mul(a, a); }

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  auto node = make_node({1});
  Scalar s = 0;
  for (Scalar v : a.value()) s += v;
  node->value[0] = s;
  return finish(node, {a}, [a](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    const Scalar g = self.grad[0];
    for (auto& v : ga) v += g;
  });
}

Tensor mean(const Tensor& a) {
  return mul_scalar(sum(a), Scalar{1} / static_cast<Scalar>(a.size()));
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
        "matmul: bad shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  auto node = make_node({M, N});
  const Scalar* av = a.value().data();
  const Scalar* bv = b.value().data();
  Scalar* ov = node->value.data();
  for (int i = 0; i < M; ++i)
    for (int k = 0; k < K; ++k) {
      const Scalar x = av[i * K + k];
      const Scalar* brow = bv + k * N;
      Scalar* orow = ov + i * N;
      for (int j = 0; j < N; ++j) orow[j] += x * brow[j];
    }
  return finish(node, {a, b}, [a, b, M, K, N](Tensor::Impl& self) {
    const Scalar* g = self.grad.data();
    if (a.requires_grad()) {
      Scalar* ga = a.get()->ensure_grad().data();
      const Scalar* bv = b.value().data();
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
          const Scalar gv = g[i * N + j];
          const Scalar* brow = bv + j;  // column j
          for (int k = 0; k < K; ++k) ga[i * K + k] += gv * brow[k * N];
        }
    }
    if (b.requires_grad()) {
      Scalar* gb = b.get()->ensure_grad().data();
      const Scalar* av = a.value().data();
      for (int i = 0; i < M; ++i)
        for (int k = 0; k < K; ++k) {
          const Scalar x = av[i * K + k];
          const Scalar* grow = g + i * N;
          Scalar* brow = gb + k * N;
          for (int j = 0; j < N; ++j) brow[j] += x * grow[j];
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
        "matmul_nt: bad shapes " + shape_str(a.shape()) + " x " +
            shape_str(b.shape()) + "^T");
  const int M = a.dim(0), K = a.dim(1), N = b.dim(0);
  auto node = make_node({M, N});
  const Scalar* av = a.value().data();
  const Scalar* bv = b.value().data();
  Scalar* ov = node->value.data();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      const Scalar* arow = av + i * K;
      const Scalar* brow = bv + j * K;
      Scalar s = 0;
      for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
      ov[i * N + j] = s;
    }
  return finish(node, {a, b}, [a, b, M, K, N](Tensor::Impl& self) {
    const Scalar* g = self.grad.data();
    if (a.requires_grad()) {
      Scalar* ga = a.get()->ensure_grad().data();
      const Scalar* bv = b.value().data();
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
          const Scalar gv = g[i * N + j];
          const Scalar* brow = bv + j * K;
          Scalar* arow = ga + i * K;
          for (int k = 0; k < K; ++k) arow[k] += gv * brow[k];
        }
    }
    if (b.requires_grad()) {
      Scalar* gb = b.get()->ensure_grad().data();
      const Scalar* av = a.value().data();
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
          const Scalar gv = g[i * N + j];
          const Scalar* arow = av + i * K;
          Scalar* brow = gb + j * K;
          for (int k = 0; k < K; ++k) brow[k] += gv * arow[k];
        }
    }
  });
}

Tensor transpose2d(const Tensor& a) {
  check(a.ndim() == 2, "transpose2d: tensor must be 2-D");
  const int M = a.dim(0), N = a.dim(1);
  auto node = make_node({N, M});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) node->value[j * M + i] = a.value()[i * N + j];
  return finish(node, {a}, [a, M, N](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) ga[i * N + j] += self.grad[j * M + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul_nt(x, w);
  if (!b.defined()) return y;
  // broadcast bias over rows
  check(b.size() == y.dim(1), "linear: bias width mismatch");
  const int M = y.dim(0), N = y.dim(1);
  auto node = make_node({M, N});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j)
      node->value[i * N + j] = y.value()[i * N + j] + b.value()[j];
  return finish(node, {y, b}, [y, b, M, N](Tensor::Impl& self) {
    if (y.requires_grad()) y.get()->accumulate(self.grad);
    if (b.requires_grad()) {
      auto& gb = b.get()->ensure_grad();
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) gb[j] += self.grad[i * N + j];
    }
  });
}

Tensor mean_rows(const Tensor& a) {
  check(a.ndim() == 2, "mean_rows: tensor must be 2-D");
  const int M = a.dim(0), N = a.dim(1);
  auto node = make_node({N});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) node->value[j] += a.value()[i * N + j];
  for (int j = 0; j < N; ++j) node->value[j] /= static_cast<Scalar>(M);
  return finish(node, {a}, [a, M, N](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j)
        ga[i * N + j] += self.grad[j] / static_cast<Scalar>(M);
  });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  check(a.ndim() == 2 && 0 <= c0 && c0 < c1 && c1 <= a.dim(1),
        "slice_cols: bad column range");
  const int M = a.dim(0), N = a.dim(1), W = c1 - c0;
  auto node = make_node({M, W});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < W; ++j)
      node->value[i * W + j] = a.value()[i * N + c0 + j];
  return finish(node, {a}, [a, M, N, W, c0](Tensor::Impl& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.get()->ensure_grad();
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < W; ++j)
        ga[i * N + c0 + j] += self.grad[i * W + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  check(!parts.empty(), "concat_cols: empty input");
  const int M = parts[0].dim(0);
  int N = 0;
  for (const auto& p : parts) {
    check(p.ndim() == 2 && p.dim(0) == M, "concat_cols: row mismatch");
    N += p.dim(1);
  }
  auto node = make_node({M, N});
  int off = 0;
  for (const auto& p : parts) {
    const int W = p.dim(1);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < W; ++j)
        node->value[i * N + off + j] = p.value()[i * W + j];
    off += W;
  }
  return finish(node, parts, [parts, M, N](Tensor::Impl& self) {
    int off = 0;
    for (const auto& p : parts) {
      const int W = p.dim(1);
      if (p.requires_grad()) {
        auto& gp = p.get()->ensure_grad();
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < W; ++j)
            gp[i * W + j] += self.grad[i * N + off + j];
      }
      off += W;
    }
  });
}

// ---------------------------------------------------------------------------
// shape

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  check(shape_numel(shape) == a.size(), "reshape: element count mismatch");
  auto node = make_node(shape);
  node->value = a.value();
  return finish(node, {a}, [a](Tensor::Impl& self) {
    if (a.requires_grad()) a.get()->accumulate(self.grad);
  });
}

Tensor flatten_hw(const Tensor& x) {
  check(x.ndim() == 3, "flatten_hw: tensor must be [C,H,W]");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2), P = H * W;
  auto node = make_node({P, C});
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p)
      node->value[p * C + c] = x.value()[c * P + p];
  return finish(node, {x}, [x, C, P](Tensor::Impl& self) {
    if (!x.requires_grad()) return;
    auto& gx = x.get()->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int p = 0; p < P; ++p) gx[c * P + p] += self.grad[p * C + c];
  });
}

Tensor unflatten_hw(const Tensor& t, int h, int w) {
  check(t.ndim() == 2 && t.dim(0) == h * w, "unflatten_hw: bad shape");
  const int P = h * w, C = t.dim(1);
  auto node = make_node({C, h, w});
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p)
      node->value[c * P + p] = t.value()[p * C + c];
  return finish(node, {t}, [t, C, P](Tensor::Impl& self) {
    if (!t.requires_grad()) return;
    auto& gt = t.get()->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int p = 0; p < P; ++p) gt[p * C + c] += self.grad[c * P + p];
  });
}

// ---------------------------------------------------------------------------
// convolution

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad) {
  check(x.ndim() == 3 && w.ndim() == 4, "conv2d: x must be [C,H,W], w [O,C,kh,kw]");
  check(x.dim(0) == w.dim(1), "conv2d: channel mismatch, input " +
                                  shape_str(x.shape()) + " vs kernel " +
                                  shape_str(w.shape()));
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  check(Ho > 0 && Wo > 0, "conv2d: output would be empty");
  if (bias.defined()) check(bias.size() == Cout, "conv2d: bias size mismatch");

  auto node = make_node({Cout, Ho, Wo});
  const Scalar* xv = x.value().data();
  const Scalar* wv = w.value().data();
  Scalar* ov = node->value.data();
  if (bias.defined())
    for (int o = 0; o < Cout; ++o)
      std::fill(ov + o * Ho * Wo, ov + (o + 1) * Ho * Wo, bias.value()[o]);

  for (int o = 0; o < Cout; ++o)
    for (int c = 0; c < Cin; ++c)
      for (int u = 0; u < kh; ++u)
        for (int v = 0; v < kw; ++v) {
          const Scalar kv = wv[((o * Cin + c) * kh + u) * kw + v];
          if (kv == Scalar{0}) continue;
          for (int i = 0; i < Ho; ++i) {
            const int y = i * stride - pad + u;
            if (y < 0 || y >= H) continue;
            const Scalar* xrow = xv + (c * H + y) * W;
            Scalar* orow = ov + (o * Ho + i) * Wo;
            // valid j range: 0 <= j*stride - pad + v < W
            int j0 = 0;
            while (j0 < Wo && j0 * stride - pad + v < 0) ++j0;
            int j1 = Wo;
            while (j1 > j0 && (j1 - 1) * stride - pad + v >= W) --j1;
            for (int j = j0; j < j1; ++j)
              orow[j] += kv * xrow[j * stride - pad + v];
          }
        }

  return finish(node, {x, w, bias.defined() ? bias : x},
                [x, w, bias, stride, pad, Cin, H, W, Cout, kh, kw, Ho,
                 Wo](Tensor::Impl& self) {
    const Scalar* g = self.grad.data();
    const Scalar* xv = x.value().data();
    const Scalar* wv = w.value().data();
    if (bias.defined() && bias.requires_grad()) {
      auto& gb = bias.get()->ensure_grad();
      for (int o = 0; o < Cout; ++o) {
        Scalar s = 0;
        for (int p = 0; p < Ho * Wo; ++p) s += g[o * Ho * Wo + p];
        gb[o] += s;
      }
    }
    Scalar* gx = x.requires_grad() ? x.get()->ensure_grad().data() : nullptr;
    Scalar* gw = w.requires_grad() ? w.get()->ensure_grad().data() : nullptr;
    if (!gx && !gw) return;
    for (int o = 0; o < Cout; ++o)
      for (int c = 0; c < Cin; ++c)
        for (int u = 0; u < kh; ++u)
          for (int v = 0; v < kw; ++v) {
            const int widx = ((o * Cin + c) * kh + u) * kw + v;
            const Scalar kv = wv[widx];
            Scalar wacc = 0;
            for (int i = 0; i < Ho; ++i) {
              const int y = i * stride - pad + u;
              if (y < 0 || y >= H) continue;
              const Scalar* grow = g + (o * Ho + i) * Wo;
              const Scalar* xrow = xv + (c * H + y) * W;
              Scalar* gxrow = gx ? gx + (c * H + y) * W : nullptr;
              int j0 = 0;
              while (j0 < Wo && j0 * stride - pad + v < 0) ++j0;
              int j1 = Wo;
              while (j1 > j0 && (j1 - 1) * stride - pad + v >= W) --j1;
              for (int j = j0; j < j1; ++j) {
                const int xx = j * stride - pad + v;
                if (gx) gxrow[xx] += kv * grow[j];
                if (gw) wacc += xrow[xx] * grow[j];
              }
            }
            if (gw) gw[widx] += wacc;
          }
  });
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int pad) {
  check(x.ndim() == 3 && w.ndim() == 3 && x.dim(0) == w.dim(0),
        "depthwise_conv2d: x [C,H,W], w [C,kh,kw] with matching channels");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int kh = w.dim(1), kw = w.dim(2);
  const int Ho = H + 2 * pad - kh + 1;
  const int Wo = W + 2 * pad - kw + 1;
  check(Ho == H && Wo == W, "depthwise_conv2d: padding must preserve shape");
  auto node = make_node({C, H, W});
  const Scalar* xv = x.value().data();
  const Scalar* wv = w.value().data();
  Scalar* ov = node->value.data();
  for (int c = 0; c < C; ++c)
    for (int u = 0; u < kh; ++u)
      for (int v = 0; v < kw; ++v) {
        const Scalar kv = wv[(c * kh + u) * kw + v];
        if (kv == Scalar{0}) continue;
        for (int i = 0; i < H; ++i) {
          const int y = i - pad + u;
          if (y < 0 || y >= H) continue;
          const Scalar* xrow = xv + (c * H + y) * W;
          Scalar* orow = ov + (c * H + i) * W;
          const int j0 = std::max(0, pad - v);
          const int j1 = std::min(W, W + pad - v);
          for (int j = j0; j < j1; ++j) orow[j] += kv * xrow[j - pad + v];
        }
      }
  return finish(node, {x, w}, [x, w, pad, C, H, W, kh, kw](Tensor::Impl& self) {
    const Scalar* g = self.grad.data();
    const Scalar* xv = x.value().data();
    const Scalar* wv = w.value().data();
    Scalar* gx = x.requires_grad() ? x.get()->ensure_grad().data() : nullptr;
    Scalar* gw = w.requires_grad() ? w.get()->ensure_grad().data() : nullptr;
    if (!gx && !gw) return;
    for (int c = 0; c < C; ++c)
      for (int u = 0; u < kh; ++u)
        for (int v = 0; v < kw; ++v) {
          const int widx = (c * kh + u) * kw + v;
          const Scalar kv = wv[widx];
          Scalar wacc = 0;
          for (int i = 0; i < H; ++i) {
            const int y = i - pad + u;
            if (y < 0 || y >= H) continue;
            const Scalar* grow = g + (c * H + i) * W;
            const Scalar* xrow = xv + (c * H + y) * W;
            Scalar* gxrow = gx ? gx + (c * H + y) * W : nullptr;
            const int j0 = std::max(0, pad - v);
            const int j1 = std::min(W, W + pad - v);
            for (int j = j0; j < j1; ++j) {
              if (gx) gxrow[j - pad + v] += kv * grow[j];
              if (gw) wacc += xrow[j - pad + v] * grow[j];
            }
          }
          if (gw) gw[widx] += wacc;
        }
  });
}

// ---------------------------------------------------------------------------
// spatial

Tensor global_avg_pool(const Tensor& x) {
  check(x.ndim() == 3, "global_avg_pool: tensor must be [C,H,W]");
  const int C = x.dim(0), P = x.dim(1) * x.dim(2);
  auto node = make_node({C});
  for (int c = 0; c < C; ++c) {
    Scalar s = 0;
    for (int p = 0; p < P; ++p) s += x.value()[c * P + p];
    node->value[c] = s / static_cast<Scalar>(P);
  }
  return finish(node, {x}, [x, C, P](Tensor::Impl& self) {
    if (!x.requires_grad()) return;
    auto& gx = x.get()->ensure_grad();
    for (int c = 0; c < C; ++c) {
      const Scalar g = self.grad[c] / static_cast<Scalar>(P);
      for (int p = 0; p < P; ++p) gx[c * P + p] += g;
    }
  });
}

namespace {
// source coordinate and interpolation weights for 2x bilinear upsampling
// (half-pixel centers, clamped at the borders)
struct Lerp {
  int i0, i1;
  Scalar w0, w1;
};
Lerp lerp_coeff(int out_idx, int in_size) {
  const Scalar src = (static_cast<Scalar>(out_idx) + Scalar{0.5}) / Scalar{2} -
                     Scalar{0.5};
  Scalar f = std::floor(src);
  int i0 = static_cast<int>(f);
  Scalar w1 = src - f;
  int i1 = i0 + 1;
  if (i0 < 0) { i0 = 0; }
  if (i1 > in_size - 1) { i1 = in_size - 1; }
  if (i0 > in_size - 1) { i0 = in_size - 1; }
  return {i0, i1, Scalar{1} - w1, w1};
}
}  // namespace

Tensor upsample_bilinear2x(const Tensor& x) {
  check(x.ndim() == 3, "upsample_bilinear2x: tensor must be [C,H,W]");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Ho = 2 * H, Wo = 2 * W;
  auto node = make_node({C, Ho, Wo});
  std::vector<Lerp> ry(Ho), rx(Wo);
  for (int i = 0; i < Ho; ++i) ry[i] = lerp_coeff(i, H);
  for (int j = 0; j < Wo; ++j) rx[j] = lerp_coeff(j, W);
  for (int c = 0; c < C; ++c) {
    const Scalar* xc = x.value().data() + c * H * W;
    Scalar* oc = node->value.data() + c * Ho * Wo;
    for (int i = 0; i < Ho; ++i)
      for (int j = 0; j < Wo; ++j) {
        const auto& a = ry[i];
        const auto& b = rx[j];
        oc[i * Wo + j] = a.w0 * (b.w0 * xc[a.i0 * W + b.i0] + b.w1 * xc[a.i0 * W + b.i1]) +
                         a.w1 * (b.w0 * xc[a.i1 * W + b.i0] + b.w1 * xc[a.i1 * W + b.i1]);
      }
  }
  return finish(node, {x}, [x, C, H, W, Ho, Wo, ry, rx](Tensor::Impl& self) {
    if (!x.requires_grad()) return;
    Scalar* gx = x.get()->ensure_grad().data();
    const Scalar* g = self.grad.data();
    for (int c = 0; c < C; ++c) {
      Scalar* gxc = gx + c * H * W;
      const Scalar* gc = g + c * Ho * Wo;
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          const auto& a = ry[i];
          const auto& b = rx[j];
          const Scalar gv = gc[i * Wo + j];
          gxc[a.i0 * W + b.i0] += gv * a.w0 * b.w0;
          gxc[a.i0 * W + b.i1] += gv * a.w0 * b.w1;
          gxc[a.i1 * W + b.i0] += gv * a.w1 * b.w0;
          gxc[a.i1 * W + b.i1] += gv * a.w1 * b.w1;
        }
    }
  });
}

// ---------------------------------------------------------------------------
// normalization

namespace {

// Shared layer-norm math over "rows" of length N laid out with a generic
// stride pattern. idx(row, k) gives the flat index of element k of the row.
template <typename IndexFn>
Tensor layer_norm_impl(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       Scalar eps, int rows, int N, IndexFn idx,
                       std::vector<int> out_shape) {
  auto node = make_node(std::move(out_shape));
  std::vector<Scalar> inv_std(static_cast<size_t>(rows));
  std::vector<Scalar> mu(static_cast<size_t>(rows));
  const auto& xv = x.value();
  for (int r = 0; r < rows; ++r) {
    Scalar m = 0;
    for (int k = 0; k < N; ++k) m += xv[idx(r, k)];
    m /= N;
    Scalar var = 0;
    for (int k = 0; k < N; ++k) {
      const Scalar d = xv[idx(r, k)] - m;
      var += d * d;
    }
    var /= N;
    mu[static_cast<size_t>(r)] = m;
    inv_std[static_cast<size_t>(r)] = Scalar{1} / std::sqrt(var + eps);
    for (int k = 0; k < N; ++k) {
      const Scalar xn = (xv[idx(r, k)] - m) * inv_std[static_cast<size_t>(r)];
      node->value[idx(r, k)] = xn * gamma.value()[k] + beta.value()[k];
    }
  }
  return finish(node, {x, gamma, beta},
                [x, gamma, beta, rows, N, idx, mu, inv_std](Tensor::Impl& self) {
    const auto& xv = x.value();
    const auto& g = self.grad;
    Scalar* gg = gamma.requires_grad() ? gamma.get()->ensure_grad().data() : nullptr;
    Scalar* gb = beta.requires_grad() ? beta.get()->ensure_grad().data() : nullptr;
    Scalar* gx = x.requires_grad() ? x.get()->ensure_grad().data() : nullptr;
    for (int r = 0; r < rows; ++r) {
      const Scalar m = mu[static_cast<size_t>(r)];
      const Scalar is = inv_std[static_cast<size_t>(r)];
      Scalar sum_gy = 0, sum_gy_xn = 0;
      for (int k = 0; k < N; ++k) {
        const Scalar xn = (xv[idx(r, k)] - m) * is;
        const Scalar gy = g[idx(r, k)] * gamma.value()[k];
        sum_gy += gy;
        sum_gy_xn += gy * xn;
        if (gg) gg[k] += g[idx(r, k)] * xn;
        if (gb) gb[k] += g[idx(r, k)];
      }
      if (gx) {
        for (int k = 0; k < N; ++k) {
          const Scalar xn = (xv[idx(r, k)] - m) * is;
          const Scalar gy = g[idx(r, k)] * gamma.value()[k];
          gx[idx(r, k)] += is * (gy - sum_gy / N - xn * sum_gy_xn / N);
        }
      }
    }
  });
}

}  // namespace

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       Scalar eps) {
  check(x.ndim() == 2 && gamma.size() == x.dim(1) && beta.size() == x.dim(1),
        "layer_norm_rows: shape mismatch");
  const int M = x.dim(0), N = x.dim(1);
  auto idx = [N](int r, int k) { return r * N + k; };
  return layer_norm_impl(x, gamma, beta, eps, M, N, idx, x.shape());
}

Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           Scalar eps) {
  check(x.ndim() == 3 && gamma.size() == x.dim(0) && beta.size() == x.dim(0),
        "layer_norm_channels: shape mismatch");
  const int C = x.dim(0), P = x.dim(1) * x.dim(2);
  auto idx = [P](int r, int k) { return k * P + r; };
  return layer_norm_impl(x, gamma, beta, eps, P, C, idx, x.shape());
}

// ---------------------------------------------------------------------------
// softmax / losses

Tensor softmax_rows(const Tensor& x) {
  return softmax_rows_biased(x, std::vector<Scalar>(static_cast<size_t>(x.size()), 0));
}

Tensor softmax_rows_biased(const Tensor& x, const std::vector<Scalar>& bias) {
  check(x.ndim() == 2, "softmax_rows_biased: tensor must be 2-D");
  check(bias.size() == static_cast<size_t>(x.size()),
        "softmax_rows_biased: bias size mismatch");
  const int M = x.dim(0), N = x.dim(1);
  auto node = make_node(x.shape());
  for (int i = 0; i < M; ++i) {
    Scalar mx = -kInf;
    for (int j = 0; j < N; ++j) {
      if (bias[i * N + j] == -kInf) continue;
      mx = std::max(mx, x.value()[i * N + j]);
    }
    check(mx != -kInf, "softmax_rows_biased: row with no admissible entry");
    Scalar z = 0;
    for (int j = 0; j < N; ++j) {
      const size_t k = static_cast<size_t>(i * N + j);
      if (bias[k] == -kInf) {
        node->value[k] = 0;
      } else {
        node->value[k] = std::exp(x.value()[k] - mx);
        z += node->value[k];
      }
    }
    for (int j = 0; j < N; ++j) node->value[static_cast<size_t>(i * N + j)] /= z;
  }
  return finish(node, {x}, [x, M, N, out = node.get()](Tensor::Impl& self) {
    if (!x.requires_grad()) return;
    auto& gx = x.get()->ensure_grad();
    for (int i = 0; i < M; ++i) {
      Scalar dot = 0;
      for (int j = 0; j < N; ++j)
        dot += self.grad[i * N + j] * out->value[i * N + j];
      for (int j = 0; j < N; ++j) {
        const Scalar y = out->value[i * N + j];
        gx[i * N + j] += y * (self.grad[i * N + j] - dot);
      }
    }
  });
}

Tensor softmax_masked(const Tensor& x, const std::vector<std::uint8_t>& keep) {
  check(x.ndim() == 1, "softmax_masked: tensor must be 1-D");
  check(keep.size() == static_cast<size_t>(x.size()), "softmax_masked: mask size");
  std::vector<Scalar> bias(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) bias[i] = keep[i] ? Scalar{0} : -kInf;
  Tensor r = softmax_rows_biased(reshape(x, {1, x.size()}), bias);
  return reshape(r, {x.size()});
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
  check(logits.ndim() == 2, "cross_entropy_rows: logits must be 2-D");
  const int M = logits.dim(0), K = logits.dim(1);
  check(static_cast<int>(targets.size()) == M, "cross_entropy_rows: target count");
  auto node = make_node({1});
  // cache softmax for backward
  auto probs = std::make_shared<std::vector<Scalar>>(logits.value().size());
  Scalar loss = 0;
  for (int i = 0; i < M; ++i) {
    Scalar mx = -kInf;
    for (int j = 0; j < K; ++j) mx = std::max(mx, logits.value()[i * K + j]);
    Scalar z = 0;
    for (int j = 0; j < K; ++j) {
      (*probs)[i * K + j] = std::exp(logits.value()[i * K + j] - mx);
      z += (*probs)[i * K + j];
    }
    for (int j = 0; j < K; ++j) (*probs)[i * K + j] /= z;
    // shifted log-sum-exp keeps the loss finite even when the target
    // probability underflows to 0
    loss += std::log(z) -
            (logits.value()[i * K + targets[static_cast<size_t>(i)]] - mx);
  }
  node->value[0] = loss / M;
  return finish(node, {logits}, [logits, targets, probs, M, K](Tensor::Impl& self) {
    if (!logits.requires_grad()) return;
    auto& gl = logits.get()->ensure_grad();
    const Scalar g = self.grad[0] / M;
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < K; ++j) {
        const Scalar onehot = j == targets[static_cast<size_t>(i)] ? 1 : 0;
        gl[i * K + j] += g * ((*probs)[i * K + j] - onehot);
      }
  });
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<Scalar>& targets) {
  check(targets.size() == static_cast<size_t>(logits.size()),
        "bce_with_logits: target count");
  const int N = logits.size();
  auto node = make_node({1});
  Scalar loss = 0;
  for (int i = 0; i < N; ++i) {
    const Scalar l = logits.value()[static_cast<size_t>(i)];
    const Scalar t = targets[static_cast<size_t>(i)];
    // max(l,0) - l*t + log(1+exp(-|l|))
    loss += std::max(l, Scalar{0}) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  node->value[0] = loss / N;
  return finish(node, {logits}, [logits, targets, N](Tensor::Impl& self) {
    if (!logits.requires_grad()) return;
    auto& gl = logits.get()->ensure_grad();
    const Scalar g = self.grad[0] / N;
    for (int i = 0; i < N; ++i) {
      const Scalar l = logits.value()[static_cast<size_t>(i)];
      gl[static_cast<size_t>(i)] += g * (sigmoid_s(l) - targets[static_cast<size_t>(i)]);
    }
  });
}

}  // namespace monfap
