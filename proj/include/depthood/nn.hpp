#pragma once

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE  // outer loops own the threads
#endif
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "depthood/rng.hpp"
#include "depthood/tensor.hpp"

namespace depthood {

using MatRM =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// ---------------------------------------------------------------------------
// Convolution, im2col + GEMM.
// ---------------------------------------------------------------------------

struct Conv {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
  std::vector<float> w;  // [out][in][ky][kx]
  std::vector<float> b;  // [out]

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_ch) * in_ch * k * k;
  }
  std::size_t param_count() const { return weight_count() + out_ch; }

  int out_dim(int in_dim) const { return (in_dim + 2 * pad - k) / stride + 1; }
};

inline Conv make_conv(int in_ch, int out_ch, int k = 3, int stride = 1,
                      int pad = 1) {
  Conv c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.w.assign(c.weight_count(), 0.0f);
  c.b.assign(out_ch, 0.0f);
  return c;
}

// Uniform fan-in init: U(-a, a) with a = 1/sqrt(in_ch * k * k).
inline void init_conv(Conv& c, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(c.in_ch) * c.k * c.k);
  for (float& x : c.w) x = static_cast<float>(rng.uniform(-a, a));
  for (float& x : c.b) x = static_cast<float>(rng.uniform(-a, a));
}

inline void im2col(const Tensor& in, int k, int stride, int pad,
                   Eigen::MatrixXf& cols, int oh, int ow) {
  const int ickk = in.c * k * k;
  cols.resize(ickk, static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      float* dst = cols.data() + static_cast<std::size_t>(oy * ow + ox) * ickk;
      const int iy0 = oy * stride - pad;
      const int ix0 = ox * stride - pad;
      int idx = 0;
      for (int ch = 0; ch < in.c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < k; ++kx, ++idx) {
            const int ix = ix0 + kx;
            dst[idx] = (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w)
                           ? in.at(ch, iy, ix)
                           : 0.0f;
          }
        }
      }
    }
  }
}

inline void col2im_add(const Eigen::MatrixXf& cols, int k, int stride, int pad,
                       Tensor& grad_in, int oh, int ow) {
  const int ickk = grad_in.c * k * k;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const float* src =
          cols.data() + static_cast<std::size_t>(oy * ow + ox) * ickk;
      const int iy0 = oy * stride - pad;
      const int ix0 = ox * stride - pad;
      int idx = 0;
      for (int ch = 0; ch < grad_in.c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < k; ++kx, ++idx) {
            const int ix = ix0 + kx;
            if (iy >= 0 && iy < grad_in.h && ix >= 0 && ix < grad_in.w)
              grad_in.at(ch, iy, ix) += src[idx];
          }
        }
      }
    }
  }
}

inline Tensor conv_forward(const Conv& c, const Tensor& in) {
  const int oh = c.out_dim(in.h);
  const int ow = c.out_dim(in.w);
  Tensor out(c.out_ch, oh, ow);
  Eigen::MatrixXf cols;
  im2col(in, c.k, c.stride, c.pad, cols, oh, ow);
  CMapRM wmat(c.w.data(), c.out_ch, c.in_ch * c.k * c.k);
  MapRM omat(out.v.data(), c.out_ch, static_cast<Eigen::Index>(oh) * ow);
  omat.noalias() = wmat * cols;
  for (int o = 0; o < c.out_ch; ++o) omat.row(o).array() += c.b[o];
  return out;
}

// Accumulates weight/bias gradients into gw/gb; if grad_in is non-null it is
// filled (not accumulated) with the gradient w.r.t. the input.
inline void conv_backward(const Conv& c, const Tensor& in, const Tensor& gout,
                          float* gw, float* gb, Tensor* grad_in) {
  const int oh = gout.h, ow = gout.w;
  Eigen::MatrixXf cols;
  im2col(in, c.k, c.stride, c.pad, cols, oh, ow);
  const int ickk = c.in_ch * c.k * c.k;
  CMapRM gomat(gout.v.data(), c.out_ch, static_cast<Eigen::Index>(oh) * ow);
  MapRM gwmat(gw, c.out_ch, ickk);
  gwmat.noalias() += gomat * cols.transpose();
  for (int o = 0; o < c.out_ch; ++o) gb[o] += gomat.row(o).sum();
  if (grad_in) {
    CMapRM wmat(c.w.data(), c.out_ch, ickk);
    Eigen::MatrixXf gcols = wmat.transpose() * gomat;
    *grad_in = Tensor(c.in_ch, in.h, in.w);
    col2im_add(gcols, c.k, c.stride, c.pad, *grad_in, oh, ow);
  }
}

// ---------------------------------------------------------------------------
// Activations and structural ops.
// ---------------------------------------------------------------------------

inline void relu_inplace(Tensor& t) {
  for (float& x : t.v) x = x > 0.0f ? x : 0.0f;
}

// g *= 1[out > 0], where out is the forward result of the ReLU.
inline void relu_backward_inplace(Tensor& g, const Tensor& out) {
  for (std::size_t i = 0; i < g.v.size(); ++i)
    if (out.v[i] <= 0.0f) g.v[i] = 0.0f;
}

inline float stable_sigmoid(float x) {
  if (x >= 0.0f) {
    const float e = std::exp(-x);
    return 1.0f / (1.0f + e);
  }
  const float e = std::exp(x);
  return e / (1.0f + e);
}

// y = d_max * sigmoid(x), floored away from exact zero so depth stays in
// (0, d_max].
inline void sigmoid_scale_inplace(Tensor& t, float scale) {
  for (float& x : t.v) {
    float s = stable_sigmoid(x);
    if (s < 1e-12f) s = 1e-12f;
    x = scale * s;
  }
}

inline void sigmoid_scale_backward_inplace(Tensor& g, const Tensor& y,
                                           float scale) {
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    const float s = y.v[i] / scale;
    g.v[i] *= scale * s * (1.0f - s);
  }
}

inline float softplus(float x) {
  if (x > 20.0f) return x;
  if (x < -20.0f) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline void softplus_inplace(Tensor& t) {
  for (float& x : t.v) x = softplus(x);
}

// dy/dx = sigmoid(x) = 1 - exp(-y).
inline void softplus_backward_inplace(Tensor& g, const Tensor& y) {
  for (std::size_t i = 0; i < g.v.size(); ++i)
    g.v[i] *= 1.0f - std::exp(-y.v[i]);
}

inline Tensor upsample2x_nearest(const Tensor& in) {
  Tensor out(in.c, in.h * 2, in.w * 2);
  for (int ch = 0; ch < in.c; ++ch)
    for (int y = 0; y < out.h; ++y) {
      const float* src = &in.at(ch, y / 2, 0);
      float* dst = &out.at(ch, y, 0);
      for (int x = 0; x < out.w; ++x) dst[x] = src[x / 2];
    }
  return out;
}

inline Tensor upsample2x_backward(const Tensor& gout) {
  Tensor gin(gout.c, gout.h / 2, gout.w / 2);
  for (int ch = 0; ch < gout.c; ++ch)
    for (int y = 0; y < gout.h; ++y)
      for (int x = 0; x < gout.w; ++x)
        gin.at(ch, y / 2, x / 2) += gout.at(ch, y, x);
  return gin;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

inline void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb) {
  ga = Tensor(c_a, g.h, g.w);
  gb = Tensor(g.c - c_a, g.h, g.w);
  std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
}

// Inverted dropout. The mask is cached by the caller so backward reuses it.
inline void dropout_forward_inplace(Tensor& t, float p, Rng& rng,
                                    std::vector<std::uint8_t>& mask) {
  mask.resize(t.v.size());
  if (p <= 0.0f) {
    std::fill(mask.begin(), mask.end(), std::uint8_t{1});
    return;
  }
  const float scale = 1.0f / (1.0f - p);
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    mask[i] = keep ? 1 : 0;
    t.v[i] = keep ? t.v[i] * scale : 0.0f;
  }
}

inline void dropout_backward_inplace(Tensor& g, float p,
                                     const std::vector<std::uint8_t>& mask) {
  if (p <= 0.0f) return;
  const float scale = 1.0f / (1.0f - p);
  for (std::size_t i = 0; i < g.v.size(); ++i)
    g.v[i] = mask[i] ? g.v[i] * scale : 0.0f;
}

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<float> m, v;

  void init(std::size_t n) {
    m.assign(n, 0.0f);
    v.assign(n, 0.0f);
    t = 0;
  }

  // One optimizer step over parameter blocks laid out consecutively in the
  // flat gradient. Updates are element-wise, so a model trained as part of a
  // larger concatenation steps identically to one trained alone.
  void step(const std::vector<std::vector<float>*>& groups, const float* g) {
    ++t;
    const double b1t = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double b2t = 1.0 - std::pow(beta2, static_cast<double>(t));
    const double alpha = lr * std::sqrt(b2t) / b1t;
    std::size_t pos = 0;
    for (auto* grp : groups) {
      float* p = grp->data();
      for (std::size_t i = 0; i < grp->size(); ++i, ++pos) {
        const double gi = g[pos];
        m[pos] = static_cast<float>(beta1 * m[pos] + (1.0 - beta1) * gi);
        v[pos] = static_cast<float>(beta2 * v[pos] + (1.0 - beta2) * gi * gi);
        p[i] -= static_cast<float>(
            alpha * m[pos] / (std::sqrt(static_cast<double>(v[pos])) + eps));
      }
    }
  }
};

}  // namespace depthood
