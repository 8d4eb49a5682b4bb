#pragma once

// Independent scalar-loop reference implementations used as test oracles.
// Deliberately naive: no shared code with the library's compute paths.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace monfap::testutil {

// Cross-correlation with zero padding: out[o](i,j) = b[o] +
//   sum_{c,u,v} w[o][c][u][v] * x[c](i*stride-pad+u, j*stride-pad+v).
inline std::vector<double> conv_oracle(const std::vector<double>& x, int cin, int h,
                                       int w, const std::vector<double>& k, int cout,
                                       int kh, int kw, int stride, int pad,
                                       const std::vector<double>* bias = nullptr) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<size_t>(cout * ho * wo), 0.0);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        double acc = bias ? (*bias)[static_cast<size_t>(o)] : 0.0;
        for (int c = 0; c < cin; ++c)
          for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v) {
              const int y = i * stride - pad + u;
              const int xx = j * stride - pad + v;
              if (y < 0 || y >= h || xx < 0 || xx >= w) continue;
              acc += k[static_cast<size_t>(((o * cin + c) * kh + u) * kw + v)] *
                     x[static_cast<size_t>((c * h + y) * w + xx)];
            }
        out[static_cast<size_t>((o * ho + i) * wo + j)] = acc;
      }
  return out;
}

// Central-difference convolution: vanilla conv minus theta times the response
// of the spatially-summed kernels applied 1x1.
inline std::vector<double> cdconv_oracle(const std::vector<double>& x, int cin, int h,
                                         int w, const std::vector<double>& k, int cout,
                                         int kh, int kw, int pad, double theta,
                                         const std::vector<double>* bias = nullptr) {
  auto out = conv_oracle(x, cin, h, w, k, cout, kh, kw, 1, pad, bias);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double diff = 0.0;
        for (int c = 0; c < cin; ++c) {
          double ks = 0.0;
          for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v)
              ks += k[static_cast<size_t>(((o * cin + c) * kh + u) * kw + v)];
          diff += ks * x[static_cast<size_t>((c * h + i) * w + j)];
        }
        out[static_cast<size_t>((o * h + i) * w + j)] -= theta * diff;
      }
  return out;
}

// Scaled dot-product attention with an additive bias, single head, scalar
// loops. q [M,D], kv [P,D], bias [M,P] of 0 or -inf. Returns [M,D].
inline std::vector<double> attention_oracle(const std::vector<double>& q, int m,
                                            const std::vector<double>& key,
                                            const std::vector<double>& val, int p,
                                            int d, const std::vector<double>& bias) {
  std::vector<double> out(static_cast<size_t>(m * d), 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < m; ++i) {
    std::vector<double> logits(static_cast<size_t>(p));
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < p; ++j) {
      double s = 0.0;
      for (int t = 0; t < d; ++t)
        s += q[static_cast<size_t>(i * d + t)] * key[static_cast<size_t>(j * d + t)];
      logits[static_cast<size_t>(j)] = s * scale + bias[static_cast<size_t>(i * p + j)];
      mx = std::max(mx, logits[static_cast<size_t>(j)]);
    }
    double z = 0.0;
    std::vector<double> wgt(static_cast<size_t>(p), 0.0);
    for (int j = 0; j < p; ++j) {
      if (std::isinf(logits[static_cast<size_t>(j)])) continue;
      wgt[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - mx);
      z += wgt[static_cast<size_t>(j)];
    }
    for (int j = 0; j < p; ++j)
      for (int t = 0; t < d; ++t)
        out[static_cast<size_t>(i * d + t)] +=
            wgt[static_cast<size_t>(j)] / z * val[static_cast<size_t>(j * d + t)];
  }
  return out;
}

// Noisy top-k gate evaluated with plain scalar code. Returns the weight vector.
inline std::vector<double> gate_oracle(const std::vector<double>& logits, int k) {
  const int n = static_cast<int>(logits.size());
  // top-k indices, ties resolved toward the lower index
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const int ia = order[static_cast<size_t>(a)], ib = order[static_cast<size_t>(b)];
      if (logits[static_cast<size_t>(ib)] > logits[static_cast<size_t>(ia)]) {
        order[static_cast<size_t>(a)] = ib;
        order[static_cast<size_t>(b)] = ia;
      }
    }
  std::vector<bool> keep(static_cast<size_t>(n), false);
  for (int i = 0; i < k; ++i) keep[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (keep[static_cast<size_t>(i)]) mx = std::max(mx, logits[static_cast<size_t>(i)]);
  double z = 0.0;
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    if (keep[static_cast<size_t>(i)]) {
      out[static_cast<size_t>(i)] = std::exp(logits[static_cast<size_t>(i)] - mx);
      z += out[static_cast<size_t>(i)];
    }
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] /= z;
  return out;
}

// Pairwise (Mann-Whitney) AUC: positives ranked above negatives, ties 0.5.
inline std::optional<double> auc_pairwise_oracle(const std::vector<double>& scores,
                                                 const std::vector<int>& labels) {
  double num = 0.0;
  long long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return num / static_cast<double>(pairs);
}

}  // namespace monfap::testutil
