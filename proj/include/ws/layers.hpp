#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ws/parallel.hpp"
#include "ws/rng.hpp"
#include "ws/tensor.hpp"

namespace ws::nn {

enum class PadMode { Valid, Same };
enum class Mode { Train, Eval };

namespace detail {

// Asymmetric `same` padding: the extra element of an even total goes on
// the trailing side.
inline std::pair<int, int> same_pad(int k, int dilation = 1) {
  const int span = (k - 1) * dilation + 1;
  const int total = span - 1;
  const int begin = total / 2;
  return {begin, total - begin};
}

}  // namespace detail

// 2D convolution, stride 1: x [B,Cin,H,W] ⊛ w [Cout,Cin,kh,kw] + b [Cout].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, PadMode pad) {
  if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1) {
    throw std::invalid_argument("conv2d: expected x[B,C,H,W], w[Co,Ci,kh,kw], b[Co]");
  }
  const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != Ci || b.dim(0) != Co) {
    throw std::invalid_argument("conv2d: channel mismatch x" + shape_str(x.shape()) + " w" +
                                shape_str(w.shape()));
  }
  const auto [pt, pb] = pad == PadMode::Same ? detail::same_pad(kh) : std::pair<int, int>{0, 0};
  const auto [pl, pr] = pad == PadMode::Same ? detail::same_pad(kw) : std::pair<int, int>{0, 0};
  const int OH = H + pt + pb - kh + 1;
  const int OW = W + pl + pr - kw + 1;
  if (OH <= 0 || OW <= 0) {
    throw std::invalid_argument("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  }

  std::vector<double> out(static_cast<size_t>(B) * Co * OH * OW);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  parallel_for(static_cast<int64_t>(B) * Co, [&](int64_t lo, int64_t hi) {
    for (int64_t nc = lo; nc < hi; ++nc) {
      const int n = static_cast<int>(nc / Co);
      const int co = static_cast<int>(nc % Co);
      double* op = out.data() + ((static_cast<size_t>(n) * Co + co) * OH) * OW;
      for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i) op[i] = bv[co];
      for (int ci = 0; ci < Ci; ++ci) {
        const double* xp = xv.data() + ((static_cast<size_t>(n) * Ci + ci) * H) * W;
        const double* wp = wv.data() + ((static_cast<size_t>(co) * Ci + ci) * kh) * kw;
        for (int i = 0; i < kh; ++i) {
          for (int j = 0; j < kw; ++j) {
            const double wt = wp[i * kw + j];
            if (wt == 0.0) continue;
            for (int oh = 0; oh < OH; ++oh) {
              const int ih = oh + i - pt;
              if (ih < 0 || ih >= H) continue;
              const int ow_lo = std::max(0, pl - j);
              const int ow_hi = std::min(OW, W + pl - j);
              const double* xrow = xp + static_cast<size_t>(ih) * W + (ow_lo + j - pl);
              double* orow = op + static_cast<size_t>(oh) * OW + ow_lo;
              for (int ow = ow_lo; ow < ow_hi; ++ow) *orow++ += wt * *xrow++;
            }
          }
        }
      }
    }
  });

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return make_op({B, Co, OH, OW}, std::move(out), {x, w, b},
                 [xn, wn, bn, B, Ci, H, W, Co, kh, kw, pt = pt, pl = pl, OH, OW](Node& self) {
                   const auto& g = self.grad;
                   if (bn->requires_grad) {
                     bn->ensure_grad();
                     for (int n = 0; n < B; ++n) {
                       for (int co = 0; co < Co; ++co) {
                         const double* gp = g.data() + ((static_cast<size_t>(n) * Co + co) * OH) * OW;
                         double s = 0.0;
                         for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i) s += gp[i];
                         bn->grad[co] += s;
                       }
                     }
                   }
                   if (wn->requires_grad) {
                     wn->ensure_grad();
                     parallel_for(Co, [&](int64_t lo, int64_t hi) {
                       for (int co = static_cast<int>(lo); co < hi; ++co) {
                         for (int n = 0; n < B; ++n) {
                           const double* gp =
                               g.data() + ((static_cast<size_t>(n) * Co + co) * OH) * OW;
                           for (int ci = 0; ci < Ci; ++ci) {
                             const double* xp =
                                 xn->value.data() + ((static_cast<size_t>(n) * Ci + ci) * H) * W;
                             double* wp =
                                 wn->grad.data() + ((static_cast<size_t>(co) * Ci + ci) * kh) * kw;
                             for (int i = 0; i < kh; ++i) {
                               for (int j = 0; j < kw; ++j) {
                                 double s = 0.0;
                                 for (int oh = 0; oh < OH; ++oh) {
                                   const int ih = oh + i - pt;
                                   if (ih < 0 || ih >= H) continue;
                                   const int ow_lo = std::max(0, pl - j);
                                   const int ow_hi = std::min(OW, W + pl - j);
                                   const double* xrow =
                                       xp + static_cast<size_t>(ih) * W + (ow_lo + j - pl);
                                   const double* grow = gp + static_cast<size_t>(oh) * OW + ow_lo;
                                   for (int ow = ow_lo; ow < ow_hi; ++ow) s += *grow++ * *xrow++;
                                 }
                                 wp[i * kw + j] += s;
                               }
                             }
                           }
                         }
                       }
                     });
                   }
                   if (xn->requires_grad) {
                     xn->ensure_grad();
                     parallel_for(B, [&](int64_t lo, int64_t hi) {
                       for (int n = static_cast<int>(lo); n < hi; ++n) {
                         for (int co = 0; co < Co; ++co) {
                           const double* gp =
                               g.data() + ((static_cast<size_t>(n) * Co + co) * OH) * OW;
                           for (int ci = 0; ci < Ci; ++ci) {
                             double* xg =
                                 xn->grad.data() + ((static_cast<size_t>(n) * Ci + ci) * H) * W;
                             const double* wp =
                                 wn->value.data() + ((static_cast<size_t>(co) * Ci + ci) * kh) * kw;
                             for (int i = 0; i < kh; ++i) {
                               for (int j = 0; j < kw; ++j) {
                                 const double wt = wp[i * kw + j];
                                 if (wt == 0.0) continue;
                                 for (int oh = 0; oh < OH; ++oh) {
                                   const int ih = oh + i - pt;
                                   if (ih < 0 || ih >= H) continue;
                                   const int ow_lo = std::max(0, pl - j);
                                   const int ow_hi = std::min(OW, W + pl - j);
                                   double* xrow = xg + static_cast<size_t>(ih) * W + (ow_lo + j - pl);
                                   const double* grow = gp + static_cast<size_t>(oh) * OW + ow_lo;
                                   for (int ow = ow_lo; ow < ow_hi; ++ow) *xrow++ += wt * *grow++;
                                 }
                               }
                             }
                           }
                         }
                       }
                     });
                   }
                 });
}

// Depthwise 2D convolution (valid padding): each input channel convolves
// with its own `mult` kernels; output channel order is ci·mult + m.
inline Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1) {
    throw std::invalid_argument("depthwise_conv2d: expected x[B,C,H,W], w[C,mult,kh,kw], b[C*mult]");
  }
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int mult = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != C || b.dim(0) != C * mult) {
    throw std::invalid_argument("depthwise_conv2d: channel mismatch x" + shape_str(x.shape()) +
                                " w" + shape_str(w.shape()));
  }
  const int OH = H - kh + 1, OW = W - kw + 1;
  if (OH <= 0 || OW <= 0) {
    throw std::invalid_argument("depthwise_conv2d: kernel larger than input " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(static_cast<size_t>(B) * C * mult * OH * OW);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  for (int n = 0; n < B; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* xp = xv.data() + ((static_cast<size_t>(n) * C + c) * H) * W;
      for (int m = 0; m < mult; ++m) {
        const int co = c * mult + m;
        double* op = out.data() + ((static_cast<size_t>(n) * C * mult + co) * OH) * OW;
        const double* wp = wv.data() + ((static_cast<size_t>(c) * mult + m) * kh) * kw;
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            double s = bv[co];
            for (int i = 0; i < kh; ++i) {
              const double* xrow = xp + static_cast<size_t>(oh + i) * W + ow;
              const double* wrow = wp + static_cast<size_t>(i) * kw;
              for (int j = 0; j < kw; ++j) s += wrow[j] * xrow[j];
            }
            op[static_cast<size_t>(oh) * OW + ow] = s;
          }
        }
      }
    }
  }
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return make_op({B, C * mult, OH, OW}, std::move(out), {x, w, b},
                 [xn, wn, bn, B, C, H, W, mult, kh, kw, OH, OW](Node& self) {
                   const auto& g = self.grad;
                   if (bn->requires_grad) bn->ensure_grad();
                   if (wn->requires_grad) wn->ensure_grad();
                   if (xn->requires_grad) xn->ensure_grad();
                   for (int n = 0; n < B; ++n) {
                     for (int c = 0; c < C; ++c) {
                       const double* xp =
                           xn->value.data() + ((static_cast<size_t>(n) * C + c) * H) * W;
                       double* xg = xn->requires_grad
                                        ? xn->grad.data() + ((static_cast<size_t>(n) * C + c) * H) * W
                                        : nullptr;
                       for (int m = 0; m < mult; ++m) {
                         const int co = c * mult + m;
                         const double* gp =
                             g.data() + ((static_cast<size_t>(n) * C * mult + co) * OH) * OW;
                         const double* wp =
                             wn->value.data() + ((static_cast<size_t>(c) * mult + m) * kh) * kw;
                         double* wg = wn->requires_grad
                                          ? wn->grad.data() +
                                                ((static_cast<size_t>(c) * mult + m) * kh) * kw
                                          : nullptr;
                         for (int oh = 0; oh < OH; ++oh) {
                           for (int ow = 0; ow < OW; ++ow) {
                             const double gv = gp[static_cast<size_t>(oh) * OW + ow];
                             if (gv == 0.0) continue;
                             if (bn->requires_grad) bn->grad[co] += gv;
                             for (int i = 0; i < kh; ++i) {
                               const size_t xoff = static_cast<size_t>(oh + i) * W + ow;
                               for (int j = 0; j < kw; ++j) {
                                 if (wg) wg[i * kw + j] += gv * xp[xoff + j];
                                 if (xg) xg[xoff + j] += gv * wp[i * kw + j];
                               }
                             }
                           }
                         }
                       }
                     }
                   }
                 });
}

// Average pooling with stride equal to the window; dimensions must divide.
inline Tensor avg_pool2d(const Tensor& x, int ph, int pw) {
  if (x.ndim() != 4) throw std::invalid_argument("avg_pool2d: expected x[B,C,H,W]");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (ph < 1 || pw < 1 || H % ph != 0 || W % pw != 0) {
    throw std::invalid_argument("avg_pool2d: window (" + std::to_string(ph) + "," +
                                std::to_string(pw) + ") does not divide " + shape_str(x.shape()));
  }
  const int OH = H / ph, OW = W / pw;
  const double inv = 1.0 / (ph * pw);
  std::vector<double> out(static_cast<size_t>(B) * C * OH * OW);
  const auto& xv = x.value();
  for (int nc = 0; nc < B * C; ++nc) {
    const double* xp = xv.data() + static_cast<size_t>(nc) * H * W;
    double* op = out.data() + static_cast<size_t>(nc) * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      for (int ow = 0; ow < OW; ++ow) {
        double s = 0.0;
        for (int i = 0; i < ph; ++i) {
          for (int j = 0; j < pw; ++j) s += xp[static_cast<size_t>(oh * ph + i) * W + ow * pw + j];
        }
        op[static_cast<size_t>(oh) * OW + ow] = s * inv;
      }
    }
  }
  auto xn = x.node();
  return make_op({B, C, OH, OW}, std::move(out), {x},
                 [xn, B, C, H, W, ph, pw, OH, OW, inv](Node& self) {
                   xn->ensure_grad();
                   for (int nc = 0; nc < B * C; ++nc) {
                     double* xg = xn->grad.data() + static_cast<size_t>(nc) * H * W;
                     const double* gp = self.grad.data() + static_cast<size_t>(nc) * OH * OW;
                     for (int oh = 0; oh < OH; ++oh) {
                       for (int ow = 0; ow < OW; ++ow) {
                         const double gv = gp[static_cast<size_t>(oh) * OW + ow] * inv;
                         for (int i = 0; i < ph; ++i) {
                           for (int j = 0; j < pw; ++j) {
                             xg[static_cast<size_t>(oh * ph + i) * W + ow * pw + j] += gv;
                           }
                         }
                       }
                     }
                   }
                 });
}

// Layer normalization of x [B,M,H,W] over the (M,H) axes per (batch, time)
// position, with learnable per-(M,H) scale and shift.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  if (x.ndim() != 4 || gamma.ndim() != 2 || beta.ndim() != 2) {
    throw std::invalid_argument("layer_norm: expected x[B,M,H,W], gamma/beta [M,H]");
  }
  const int B = x.dim(0), M = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.dim(0) != M || gamma.dim(1) != H || beta.dim(0) != M || beta.dim(1) != H) {
    throw std::invalid_argument("layer_norm: param shape " + shape_str(gamma.shape()) +
                                " does not match features of " + shape_str(x.shape()));
  }
  const int G = M * H;  // normalization group size
  std::vector<double> out(x.value().size());
  std::vector<double> mean(static_cast<size_t>(B) * W), istd(static_cast<size_t>(B) * W);
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (int n = 0; n < B; ++n) {
    for (int w = 0; w < W; ++w) {
      double mu = 0.0;
      for (int f = 0; f < G; ++f) mu += xv[(static_cast<size_t>(n) * G + f) * W + w];
      mu /= G;
      double var = 0.0;
      for (int f = 0; f < G; ++f) {
        const double d = xv[(static_cast<size_t>(n) * G + f) * W + w] - mu;
        var += d * d;
      }
      var /= G;
      const double is = 1.0 / std::sqrt(var + eps);
      mean[static_cast<size_t>(n) * W + w] = mu;
      istd[static_cast<size_t>(n) * W + w] = is;
      for (int f = 0; f < G; ++f) {
        const size_t idx = (static_cast<size_t>(n) * G + f) * W + w;
        out[idx] = gv[f] * (xv[idx] - mu) * is + bv[f];
      }
    }
  }
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return make_op(x.shape(), std::move(out), {x, gamma, beta},
                 [xn, gn, bn, B, W, G, mean = std::move(mean), istd = std::move(istd)](Node& self) {
                   if (gn->requires_grad) gn->ensure_grad();
                   if (bn->requires_grad) bn->ensure_grad();
                   if (xn->requires_grad) xn->ensure_grad();
                   std::vector<double> xhat(static_cast<size_t>(G)), gy(static_cast<size_t>(G));
                   for (int n = 0; n < B; ++n) {
                     for (int w = 0; w < W; ++w) {
                       const double mu = mean[static_cast<size_t>(n) * W + w];
                       const double is = istd[static_cast<size_t>(n) * W + w];
                       double sum_gy = 0.0, sum_gy_x = 0.0;
                       for (int f = 0; f < G; ++f) {
                         const size_t idx = (static_cast<size_t>(n) * G + f) * W + w;
                         xhat[f] = (xn->value[idx] - mu) * is;
                         gy[f] = self.grad[idx] * gn->value[f];
                         sum_gy += gy[f];
                         sum_gy_x += gy[f] * xhat[f];
                         if (gn->requires_grad) gn->grad[f] += self.grad[idx] * xhat[f];
                         if (bn->requires_grad) bn->grad[f] += self.grad[idx];
                       }
                       if (xn->requires_grad) {
                         for (int f = 0; f < G; ++f) {
                           const size_t idx = (static_cast<size_t>(n) * G + f) * W + w;
                           xn->grad[idx] +=
                               is * (gy[f] - sum_gy / G - xhat[f] * sum_gy_x / G);
                         }
                       }
                     }
                   }
                 });
}

// Inverted dropout: active in Train mode only; kept units scale by
// 1/(1-rate) so the output expectation matches Eval mode.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.value().size());
  for (auto& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  std::vector<double> out(x.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * mask[i];
  auto xn = x.node();
  return make_op(x.shape(), std::move(out), {x}, [xn, mask = std::move(mask)](Node& self) {
    xn->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
  });
}

// Fully connected layer: x [B,in] × w [in,out] + b [out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1 || x.dim(1) != w.dim(0) ||
      b.dim(0) != w.dim(1)) {
    throw std::invalid_argument("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                                shape_str(w.shape()) + " b" + shape_str(b.shape()));
  }
  const int B = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  std::vector<double> out(static_cast<size_t>(B) * out_dim);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  for (int n = 0; n < B; ++n) {
    double* op = out.data() + static_cast<size_t>(n) * out_dim;
    for (int j = 0; j < out_dim; ++j) op[j] = bv[j];
    const double* xp = xv.data() + static_cast<size_t>(n) * in;
    for (int p = 0; p < in; ++p) {
      const double xvp = xp[p];
      if (xvp == 0.0) continue;
      const double* wrow = wv.data() + static_cast<size_t>(p) * out_dim;
      for (int j = 0; j < out_dim; ++j) op[j] += xvp * wrow[j];
    }
  }
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return make_op({B, out_dim}, std::move(out), {x, w, b}, [xn, wn, bn, B, in, out_dim](Node& self) {
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int n = 0; n < B; ++n) {
        const double* gp = self.grad.data() + static_cast<size_t>(n) * out_dim;
        for (int j = 0; j < out_dim; ++j) bn->grad[j] += gp[j];
      }
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      for (int n = 0; n < B; ++n) {
        const double* gp = self.grad.data() + static_cast<size_t>(n) * out_dim;
        const double* xp = xn->value.data() + static_cast<size_t>(n) * in;
        for (int p = 0; p < in; ++p) {
          const double xvp = xp[p];
          if (xvp == 0.0) continue;
          double* wrow = wn->grad.data() + static_cast<size_t>(p) * out_dim;
          for (int j = 0; j < out_dim; ++j) wrow[j] += xvp * gp[j];
        }
      }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (int n = 0; n < B; ++n) {
        const double* gp = self.grad.data() + static_cast<size_t>(n) * out_dim;
        double* xg = xn->grad.data() + static_cast<size_t>(n) * in;
        for (int p = 0; p < in; ++p) {
          const double* wrow = wn->value.data() + static_cast<size_t>(p) * out_dim;
          double s = 0.0;
          for (int j = 0; j < out_dim; ++j) s += wrow[j] * gp[j];
          xg[p] += s;
        }
      }
    }
  });
}

// 1D dilated convolution with `same` padding: x [B,Cin,T] ⊛ w [F,Cin,k].
inline Tensor dilated_conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int dilation) {
  if (x.ndim() != 3 || w.ndim() != 3 || b.ndim() != 1 || dilation < 1) {
    throw std::invalid_argument("dilated_conv1d: expected x[B,C,T], w[F,C,k], dilation >= 1");
  }
  const int B = x.dim(0), Ci = x.dim(1), T = x.dim(2);
  const int F = w.dim(0), k = w.dim(2);
  if (w.dim(1) != Ci || b.dim(0) != F) {
    throw std::invalid_argument("dilated_conv1d: channel mismatch x" + shape_str(x.shape()) +
                                " w" + shape_str(w.shape()));
  }
  const auto [pl, pr] = detail::same_pad(k, dilation);
  (void)pr;
  std::vector<double> out(static_cast<size_t>(B) * F * T);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  for (int n = 0; n < B; ++n) {
    for (int f = 0; f < F; ++f) {
      double* op = out.data() + (static_cast<size_t>(n) * F + f) * T;
      for (int t = 0; t < T; ++t) op[t] = bv[f];
      for (int ci = 0; ci < Ci; ++ci) {
        const double* xp = xv.data() + (static_cast<size_t>(n) * Ci + ci) * T;
        const double* wp = wv.data() + (static_cast<size_t>(f) * Ci + ci) * k;
        for (int j = 0; j < k; ++j) {
          const double wt = wp[j];
          if (wt == 0.0) continue;
          const int shift = j * dilation - pl;
          const int t_lo = std::max(0, -shift);
          const int t_hi = std::min(T, T - shift);
          for (int t = t_lo; t < t_hi; ++t) op[t] += wt * xp[t + shift];
        }
      }
    }
  }
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return make_op({B, F, T}, std::move(out), {x, w, b},
                 [xn, wn, bn, B, Ci, T, F, k, dilation, pl = pl](Node& self) {
                   if (wn->requires_grad) wn->ensure_grad();
                   if (xn->requires_grad) xn->ensure_grad();
                   if (bn->requires_grad) {
                     bn->ensure_grad();
                     for (int n = 0; n < B; ++n) {
                       for (int f = 0; f < F; ++f) {
                         const double* gp = self.grad.data() + (static_cast<size_t>(n) * F + f) * T;
                         double s = 0.0;
                         for (int t = 0; t < T; ++t) s += gp[t];
                         bn->grad[f] += s;
                       }
                     }
                   }
                   for (int n = 0; n < B; ++n) {
                     for (int f = 0; f < F; ++f) {
                       const double* gp = self.grad.data() + (static_cast<size_t>(n) * F + f) * T;
                       for (int ci = 0; ci < Ci; ++ci) {
                         const double* xp = xn->value.data() + (static_cast<size_t>(n) * Ci + ci) * T;
                         const double* wp = wn->value.data() + (static_cast<size_t>(f) * Ci + ci) * k;
                         double* wg = wn->requires_grad
                                          ? wn->grad.data() + (static_cast<size_t>(f) * Ci + ci) * k
                                          : nullptr;
                         double* xg = xn->requires_grad
                                          ? xn->grad.data() + (static_cast<size_t>(n) * Ci + ci) * T
                                          : nullptr;
                         for (int j = 0; j < k; ++j) {
                           const int shift = j * dilation - pl;
                           const int t_lo = std::max(0, -shift);
                           const int t_hi = std::min(T, T - shift);
                           if (wg) {
                             double s = 0.0;
                             for (int t = t_lo; t < t_hi; ++t) s += gp[t] * xp[t + shift];
                             wg[j] += s;
                           }
                           if (xg) {
                             const double wt = wp[j];
                             if (wt != 0.0) {
                               for (int t = t_lo; t < t_hi; ++t) xg[t + shift] += wt * gp[t];
                             }
                           }
                         }
                       }
                     }
                   }
                 });
}

struct AttentionResult {
  Tensor output;  // [B,T,D]
  Tensor probs;   // [B*heads, T, T]; rows sum to 1
};

// Multi-head self-attention on a sequence x [B,T,D]: per head,
// softmax(QKᵀ/√d_head)·V, heads concatenated and projected back to D.
inline AttentionResult multi_head_self_attention(const Tensor& x, const Tensor& wq,
                                                 const Tensor& bq, const Tensor& wk,
                                                 const Tensor& bk, const Tensor& wv,
                                                 const Tensor& bv, const Tensor& wo,
                                                 const Tensor& bo, int heads) {
  if (x.ndim() != 3) throw std::invalid_argument("attention: expected x[B,T,D]");
  const int B = x.dim(0), T = x.dim(1), D = x.dim(2);
  if (heads < 1 || D % heads != 0) {
    throw std::invalid_argument("attention: model dim " + std::to_string(D) +
                                " not divisible by heads " + std::to_string(heads));
  }
  const int dh = D / heads;
  const Tensor flat = reshape(x, {B * T, D});
  auto project = [&](const Tensor& w, const Tensor& b) {
    // [B*T,D] -> [B,T,h,dh] -> [B,h,T,dh] -> [B*h,T,dh]
    Tensor p = linear(flat, w, b);
    p = reshape(p, {B, T, heads, dh});
    p = permute(p, {0, 2, 1, 3});
    return reshape(p, {B * heads, T, dh});
  };
  const Tensor q = project(wq, bq);
  const Tensor k = project(wk, bk);
  const Tensor v = project(wv, bv);
  const Tensor scores = scale(bmm(q, permute(k, {0, 2, 1})), 1.0 / std::sqrt(double(dh)));
  const Tensor probs = softmax_last(scores);
  Tensor ctx = bmm(probs, v);                       // [B*h,T,dh]
  ctx = reshape(ctx, {B, heads, T, dh});
  ctx = permute(ctx, {0, 2, 1, 3});                 // [B,T,h,dh]
  ctx = reshape(ctx, {B * T, D});
  const Tensor out = reshape(linear(ctx, wo, bo), {B, T, D});
  return {out, probs};
}

// Weight initializers. Conv/dense kernels use truncated-normal scaled by
// fan-in; attention projections use Glorot-uniform; biases start at zero.
inline Tensor init_trunc_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(1.0 / fan_in);
  std::vector<double> data(static_cast<size_t>(numel_of(shape)));
  for (auto& d : data) d = rng.truncated_normal(stddev);
  return Tensor::from(std::move(shape), std::move(data), true);
}

inline Tensor init_glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> data(static_cast<size_t>(numel_of(shape)));
  for (auto& d : data) d = rng.uniform(-limit, limit);
  return Tensor::from(std::move(shape), std::move(data), true);
}

inline Tensor init_zeros(std::vector<int> shape) {
  return Tensor::zeros(std::move(shape), true);
}

}  // namespace ws::nn
