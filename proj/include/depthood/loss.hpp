#pragma once

#include <cmath>

#include "depthood/model.hpp"
#include "depthood/tensor.hpp"

namespace depthood {

// L1 reconstruction loss: mean absolute difference over all elements.
// Accumulated in double so oracle comparisons hold to tight tolerances.
inline double reconstruction_loss(const Tensor& xhat, const Tensor& x) {
  require_same_shape(xhat, x, "reconstruction_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.v.size(); ++i)
    sum += std::abs(static_cast<double>(xhat.v[i]) - x.v[i]);
  return sum / static_cast<double>(x.v.size());
}

// d/dxhat of reconstruction_loss, scaled by `weight`.
inline Tensor reconstruction_loss_grad(const Tensor& xhat, const Tensor& x,
                                       double weight = 1.0) {
  require_same_shape(xhat, x, "reconstruction_loss");
  Tensor g(xhat.c, xhat.h, xhat.w);
  const float s = static_cast<float>(weight / static_cast<double>(x.v.size()));
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const float d = xhat.v[i] - x.v[i];
    g.v[i] = d > 0.0f ? s : (d < 0.0f ? -s : 0.0f);
  }
  return g;
}

// Plain depth supervision: mean |dhat - d|.
inline double depth_loss_plain(const DepthMap& dhat, const DepthMap& d) {
  return reconstruction_loss(dhat, d);
}

inline Tensor depth_loss_plain_grad(const DepthMap& dhat, const DepthMap& d,
                                    double weight = 1.0) {
  return reconstruction_loss_grad(dhat, d, weight);
}

// Laplace negative log-likelihood: mean of |dhat - d| / b + log(2 b).
inline double depth_loss_laplace(const DepthMap& dhat, const DepthMap& d,
                                 const Tensor& b) {
  require_same_shape(dhat, d, "depth_loss");
  require_same_shape(dhat, b, "depth_loss scale");
  double sum = 0.0;
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    const double bi = b.v[i];
    if (!(bi > 0.0)) throw InputError("depth_loss: scale must be positive");
    sum += std::abs(static_cast<double>(dhat.v[i]) - d.v[i]) / bi +
           std::log(2.0 * bi);
  }
  return sum / static_cast<double>(d.v.size());
}

// Gradients w.r.t. dhat and b.
inline void depth_loss_laplace_grad(const DepthMap& dhat, const DepthMap& d,
                                    const Tensor& b, Tensor& g_dhat,
                                    Tensor& g_b, double weight = 1.0) {
  require_same_shape(dhat, d, "depth_loss");
  require_same_shape(dhat, b, "depth_loss scale");
  g_dhat = Tensor(dhat.c, dhat.h, dhat.w);
  g_b = Tensor(b.c, b.h, b.w);
  const double n = static_cast<double>(d.v.size());
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    const double bi = b.v[i];
    if (!(bi > 0.0)) throw InputError("depth_loss: scale must be positive");
    const double diff = static_cast<double>(dhat.v[i]) - d.v[i];
    const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    g_dhat.v[i] = static_cast<float>(weight * sgn / (bi * n));
    g_b.v[i] =
        static_cast<float>(weight * (1.0 / bi - std::abs(diff) / (bi * bi)) / n);
  }
}

// Variant dispatcher matching the training harnesses.
inline double depth_loss(const DepthMap& dhat, const DepthMap& d, Variant v,
                         const Tensor* scale = nullptr) {
  if (v == Variant::heteroscedastic) {
    if (!scale) throw InputError("depth_loss: heteroscedastic needs a scale map");
    return depth_loss_laplace(dhat, d, *scale);
  }
  return depth_loss_plain(dhat, d);
}

}  // namespace depthood
