#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace monfap {

using Scalar = double;

// Reverse-mode autodiff tensor. Handles are cheap shared references to the
// underlying node; ops build a graph while grad mode is enabled and
// backward() walks it in reverse topological order.
class Tensor {
 public:
  struct Impl {
    std::vector<int> shape;
    std::vector<Scalar> value;
    std::vector<Scalar> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Impl>> parents;
    // Pushes this node's grad into its parents' grads.
    std::function<void(Impl&)> backward_fn;

    void accumulate(const std::vector<Scalar>& g);
    std::vector<Scalar>& ensure_grad();
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, Scalar v, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<Scalar> data,
                          bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(impl_->value.size()); }

  std::vector<Scalar>& value() { return impl_->value; }
  const std::vector<Scalar>& value() const { return impl_->value; }
  std::vector<Scalar>& grad() { return impl_->ensure_grad(); }
  bool has_grad() const { return !impl_->grad.empty(); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  Scalar item() const;

  // Scalar roots only. Seeds d(root)/d(root)=1 and propagates.
  void backward() const;
  void zero_grad();

  Impl* get() const { return impl_.get(); }
  const std::shared_ptr<Impl>& ptr() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// Grad mode is process-global; the library is single-threaded by design.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }

 private:
  bool prev_;
};

int shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// --- elementwise; operands must match shapes or either may be a 1-element
//     scalar tensor, which broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, Scalar s);
Tensor mul_scalar(const Tensor& a, Scalar s);
Tensor neg(const Tensor& a);

// --- unary
Tensor gelu(const Tensor& a);      // exact erf form
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);

// --- reductions
Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]

// --- linear algebra (2-D)
Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]x[K,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [M,K]x[N,K]^T -> [M,N]
Tensor transpose2d(const Tensor& a);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x[M,I], w[O,I], b[O] or empty
Tensor mean_rows(const Tensor& a);                   // [M,N] -> [N]
Tensor slice_cols(const Tensor& a, int c0, int c1);  // [M,N] -> [M,c1-c0]
Tensor concat_cols(const std::vector<Tensor>& parts);

// --- shape
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor flatten_hw(const Tensor& x);                    // [C,H,W] -> [H*W,C]
Tensor unflatten_hw(const Tensor& t, int h, int w);    // [H*W,C] -> [C,h,w]

// --- convolution (cross-correlation, the deep-learning convention)
// x [Cin,H,W], w [Cout,Cin,kh,kw], optional bias [Cout]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
// x [C,H,W], w [C,kh,kw]; per-channel kernels, same padding
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int pad);

// --- spatial
Tensor global_avg_pool(const Tensor& x);      // [C,H,W] -> [C]
Tensor upsample_bilinear2x(const Tensor& x);  // [C,H,W] -> [C,2H,2W]

// --- normalization
// Normalizes each row of x [M,N] to zero mean / unit variance, then scales by
// gamma and shifts by beta (both [N]).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       Scalar eps = 1e-5);
// Normalizes the channel vector at every spatial position of x [C,H,W].
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           Scalar eps = 1e-5);

// --- softmax / losses
Tensor softmax_rows(const Tensor& x);  // [M,N]
// Additive-bias softmax. bias entries must be 0 or -inf; -inf positions get
// weight exactly 0. Rows with no admissible entry are a caller error.
Tensor softmax_rows_biased(const Tensor& x, const std::vector<Scalar>& bias);
// Softmax over the entries of a vector [N] where keep[i]!=0; the rest are
// exactly 0 in the output and receive no gradient.
Tensor softmax_masked(const Tensor& x, const std::vector<std::uint8_t>& keep);
// Mean over rows of -log softmax(logits)[target]. logits [N,K].
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets);
// Mean binary cross-entropy with logits. logits [N], targets in [0,1].
Tensor bce_with_logits(const Tensor& logits, const std::vector<Scalar>& targets);

}  // namespace monfap
