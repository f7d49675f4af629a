#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "depthood/error.hpp"

namespace depthood {

// Dense CHW float tensor. Images are 3xHxW in [0,1], depth maps 1xHxW.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, float fill = 0.0f)
      : c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

  std::size_t size() const { return v.size(); }

  float& at(int ch, int y, int x) {
    return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
  float at(int ch, int y, int x) const {
    return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }

  float* channel(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  const float* channel(int ch) const {
    return v.data() + static_cast<std::size_t>(ch) * h * w;
  }

  bool same_shape(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }

  void fill(float x) { std::fill(v.begin(), v.end(), x); }
};

using Image = Tensor;     // 3 channels, values in [0,1]
using DepthMap = Tensor;  // 1 channel, values in (0, d_max]

struct FeaturePyramid {
  // levels[j] has spatial size (h / 2^(j+1), w / 2^(j+1)).
  std::vector<Tensor> levels;

  int count() const { return static_cast<int>(levels.size()); }
  const Tensor& top() const { return levels.back(); }
};

inline bool all_finite(const Tensor& t) {
  for (float x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const std::string& what) {
  if (!a.same_shape(b))
    throw InputError(what + ": shape mismatch (" + std::to_string(a.c) + "x" +
                     std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " +
                     std::to_string(b.c) + "x" + std::to_string(b.h) + "x" +
                     std::to_string(b.w) + ")");
}

inline void require_image(const Tensor& t, const std::string& what) {
  if (t.c != 3) throw InputError(what + ": expected a 3-channel image");
  if (t.h <= 0 || t.w <= 0) throw InputError(what + ": empty image");
}

inline Tensor hflip(const Tensor& t) {
  Tensor out(t.c, t.h, t.w);
  for (int ch = 0; ch < t.c; ++ch)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) out.at(ch, y, x) = t.at(ch, y, t.w - 1 - x);
  return out;
}

inline Tensor clamp01(const Tensor& t) {
  Tensor out = t;
  for (float& x : out.v) x = std::clamp(x, 0.0f, 1.0f);
  return out;
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace depthood
