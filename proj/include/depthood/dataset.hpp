#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "depthood/error.hpp"
#include "depthood/rng.hpp"
#include "depthood/tensor.hpp"

namespace depthood {

struct SceneParams {
  int h = 64, w = 64;
  int k_min = 2, k_max = 5;  // shapes per scene
  int palette_id = 0;
  float d_max = 10.0f;
  int background = 0;
};

inline void validate_scene_params(const SceneParams& p) {
  if (p.h <= 0 || p.w <= 0) throw InputError("scene resolution must be positive");
  if (p.k_min < 1 || p.k_max < p.k_min)
    throw InputError("shape count range invalid");
  if (p.d_max <= 0.0f) throw InputError("d_max must be positive");
}

// Fixed saturated in-distribution palette.
inline const std::array<std::array<float, 3>, 8>& id_palette() {
  static const std::array<std::array<float, 3>, 8> p{{{0.90f, 0.10f, 0.10f},
                                                      {0.10f, 0.80f, 0.15f},
                                                      {0.15f, 0.20f, 0.90f},
                                                      {0.95f, 0.85f, 0.10f},
                                                      {0.85f, 0.15f, 0.85f},
                                                      {0.10f, 0.85f, 0.85f},
                                                      {0.95f, 0.55f, 0.10f},
                                                      {0.55f, 0.15f, 0.90f}}};
  return p;
}

struct ShapeDesc {
  enum Kind { kRect, kCircle, kTriangle, kEllipse };
  Kind kind = kRect;
  int color_idx = 0;
  float depth = 1.0f;
  float r = 0, g = 0, b = 0;  // rendered (distance-shaded) color
  float cx = 0, cy = 0;       // center, pixel coordinates
  float ax = 1, ay = 1;       // half extents

  bool covers(int x, int y) const {
    const float px = static_cast<float>(x) + 0.5f - cx;
    const float py = static_cast<float>(y) + 0.5f - cy;
    switch (kind) {
      case kRect:
        return std::abs(px) <= ax && std::abs(py) <= ay;
      case kCircle:
      case kEllipse: {
        const float u = px / ax, v = py / ay;
        return u * u + v * v <= 1.0f;
      }
      case kTriangle: {
        if (py < -ay || py > ay) return false;
        const float half_width = ax * (py + ay) / (2.0f * ay);
        return std::abs(px) <= half_width;
      }
    }
    return false;
  }
};

struct Scene {
  Image image;
  DepthMap depth;
  int shape_count = 0;
};

namespace detail {

// Nearer shapes get brighter colors; together with the inverse-depth size
// law this makes depth recoverable from appearance.
inline float depth_shade(float depth, float d_max) {
  return 1.0f - 0.55f * depth / d_max;
}

inline void paint_background(Scene& s, const SceneParams& p) {
  const float top[3] = {0.82f, 0.84f, 0.88f};
  const float bottom[3] = {0.50f, 0.54f, 0.60f};
  for (int y = 0; y < p.h; ++y) {
    const float t = p.h > 1 ? static_cast<float>(y) / (p.h - 1) : 0.0f;
    for (int c = 0; c < 3; ++c) {
      const float val = top[c] + (bottom[c] - top[c]) * t;
      for (int x = 0; x < p.w; ++x) s.image.at(c, y, x) = val;
    }
  }
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) s.depth.at(0, y, x) = p.d_max;
}

inline ShapeDesc sample_shape(Rng& rng, const SceneParams& p, bool id_family) {
  ShapeDesc sh;
  if (id_family)
    sh.kind = rng.uniform_int(2) == 0 ? ShapeDesc::kRect : ShapeDesc::kCircle;
  else
    sh.kind =
        rng.uniform_int(2) == 0 ? ShapeDesc::kTriangle : ShapeDesc::kEllipse;
  sh.color_idx = rng.uniform_int(static_cast<int>(id_palette().size()));
  sh.depth = static_cast<float>(
      rng.uniform(0.1 * p.d_max, 0.9 * p.d_max));
  sh.cx = static_cast<float>(rng.uniform(0.0, p.w));
  sh.cy = static_cast<float>(rng.uniform(0.0, p.h));
  // Screen size follows inverse depth, with jitter.
  float a = 0.032f * p.h * p.d_max / sh.depth;
  a *= static_cast<float>(rng.uniform(0.85, 1.15));
  a = std::max(a, 1.5f);
  if (sh.kind == ShapeDesc::kRect) {
    sh.ax = a * static_cast<float>(rng.uniform(0.7, 1.3));
    sh.ay = a * static_cast<float>(rng.uniform(0.7, 1.3));
  } else if (sh.kind == ShapeDesc::kEllipse) {
    sh.ax = a * static_cast<float>(rng.uniform(1.8, 2.6));
    sh.ay = a * static_cast<float>(rng.uniform(0.45, 0.65));
  } else {
    sh.ax = sh.ay = a;
  }
  const float shade = depth_shade(sh.depth, p.d_max);
  const auto& col = id_palette()[sh.color_idx];
  sh.r = col[0] * shade;
  sh.g = col[1] * shade;
  sh.b = col[2] * shade;
  return sh;
}

inline void paint_shape(Scene& s, const ShapeDesc& sh) {
  const int x0 = std::max(0, static_cast<int>(std::floor(sh.cx - sh.ax - 1)));
  const int x1 = std::min(s.image.w - 1,
                          static_cast<int>(std::ceil(sh.cx + sh.ax + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(sh.cy - sh.ay - 1)));
  const int y1 = std::min(s.image.h - 1,
                          static_cast<int>(std::ceil(sh.cy + sh.ay + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (sh.covers(x, y)) {
        s.image.at(0, y, x) = sh.r;
        s.image.at(1, y, x) = sh.g;
        s.image.at(2, y, x) = sh.b;
        s.depth.at(0, y, x) = sh.depth;
      }
}

inline Scene generate_scene(std::uint64_t seed, const SceneParams& p,
                            bool id_family,
                            std::vector<ShapeDesc>* shapes_out) {
  validate_scene_params(p);
  Rng rng(derive_seed(seed, stream::kScenes));
  Scene s;
  s.image = Image(3, p.h, p.w);
  s.depth = DepthMap(1, p.h, p.w);
  paint_background(s, p);
  const int k = p.k_min + rng.uniform_int(p.k_max - p.k_min + 1);
  std::vector<ShapeDesc> shapes;
  shapes.reserve(k);
  for (int i = 0; i < k; ++i) shapes.push_back(sample_shape(rng, p, id_family));
  // Far-to-near painter's order; the nearest shape ends up visible.
  std::stable_sort(shapes.begin(), shapes.end(),
                   [](const ShapeDesc& a, const ShapeDesc& b) {
                     return a.depth > b.depth;
                   });
  for (const ShapeDesc& sh : shapes) paint_shape(s, sh);
  s.shape_count = k;
  if (shapes_out) *shapes_out = std::move(shapes);
  return s;
}

}  // namespace detail

// Deterministic in-distribution scene: gradient background plus axis-aligned
// rectangles and circles from the ID palette over a d_max background.
inline Scene generate_id_scene(std::uint64_t seed, const SceneParams& p,
                               std::vector<ShapeDesc>* shapes_out = nullptr) {
  return detail::generate_scene(seed, p, /*id_family=*/true, shapes_out);
}

enum class OodVariant { palette_shift, texture_noise, shape_family };

inline std::string to_string(OodVariant v) {
  switch (v) {
    case OodVariant::palette_shift: return "palette_shift";
    case OodVariant::texture_noise: return "texture_noise";
    case OodVariant::shape_family: return "shape_family";
  }
  return "palette_shift";
}

inline OodVariant ood_variant_from_string(const std::string& s) {
  if (s == "palette_shift") return OodVariant::palette_shift;
  if (s == "texture_noise") return OodVariant::texture_noise;
  if (s == "shape_family") return OodVariant::shape_family;
  throw UsageError("unknown OOD variant: " + s);
}

struct OodScene {
  Image image;
  std::optional<DepthMap> depth;  // present when the variant defines geometry
};

inline OodScene generate_ood(std::uint64_t seed, OodVariant variant,
                             const SceneParams& p) {
  OodScene out;
  switch (variant) {
    case OodVariant::palette_shift: {
      // ID geometry with every color replaced by its complement.
      Scene s = generate_id_scene(seed, p);
      for (float& x : s.image.v) x = 1.0f - x;
      out.image = std::move(s.image);
      out.depth = std::move(s.depth);
      return out;
    }
    case OodVariant::texture_noise: {
      validate_scene_params(p);
      Rng rng(derive_seed(seed, stream::kScenes, 2));
      Image img(3, p.h, p.w);
      for (float& x : img.v) x = static_cast<float>(rng.uniform());
      // Smooth into blobs: separable box blur, three passes.
      const int radius = 2;
      Image tmp(3, p.h, p.w);
      for (int pass = 0; pass < 3; ++pass) {
        for (int c = 0; c < 3; ++c) {
          for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x) {
              float acc = 0.0f;
              int cnt = 0;
              for (int dx = -radius; dx <= radius; ++dx) {
                const int xx = x + dx;
                if (xx >= 0 && xx < p.w) {
                  acc += img.at(c, y, xx);
                  ++cnt;
                }
              }
              tmp.at(c, y, x) = acc / cnt;
            }
          for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x) {
              float acc = 0.0f;
              int cnt = 0;
              for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy >= 0 && yy < p.h) {
                  acc += tmp.at(c, yy, x);
                  ++cnt;
                }
              }
              img.at(c, y, x) = acc / cnt;
            }
        }
      }
      for (int c = 0; c < 3; ++c) {
        float lo = 1.0f, hi = 0.0f;
        for (int y = 0; y < p.h; ++y)
          for (int x = 0; x < p.w; ++x) {
            lo = std::min(lo, img.at(c, y, x));
            hi = std::max(hi, img.at(c, y, x));
          }
        const float span = hi - lo;
        for (int y = 0; y < p.h; ++y)
          for (int x = 0; x < p.w; ++x) {
            const float t = span > 0.0f ? (img.at(c, y, x) - lo) / span : 0.5f;
            img.at(c, y, x) = 0.05f + 0.90f * t;
          }
      }
      out.image = std::move(img);
      return out;
    }
    case OodVariant::shape_family: {
      Scene s = detail::generate_scene(seed, p, /*id_family=*/false, nullptr);
      out.image = std::move(s.image);
      out.depth = std::move(s.depth);
      return out;
    }
  }
  throw UsageError("unknown OOD variant");
}

inline Image generate_ood_scene(std::uint64_t seed, OodVariant variant,
                                const SceneParams& p = {}) {
  return generate_ood(seed, variant, p).image;
}

// ---------------------------------------------------------------------------
// Evaluation set assembly.
// ---------------------------------------------------------------------------

struct EvalItem {
  Image image;
  int label = 1;  // 1 = in-distribution, 0 = OOD
  std::string id;
};

struct EvalSet {
  std::vector<EvalItem> items;
  int n_id = 0, n_ood = 0;
};

// Keeps every ID image; caps OOD at `cap` by seeded sampling without
// replacement.
inline EvalSet make_eval_set(const std::vector<Image>& id_images,
                             const std::vector<Image>& ood_images, int cap,
                             std::uint64_t seed,
                             const std::vector<std::string>* id_names = nullptr,
                             const std::vector<std::string>* ood_names = nullptr) {
  if (id_images.empty()) throw InputError("make_eval_set: no ID images");
  if (ood_images.empty()) throw InputError("make_eval_set: no OOD images");
  if (cap < 1) throw InputError("make_eval_set: cap must be >= 1");
  const int h = id_images[0].h, w = id_images[0].w;
  auto check = [&](const Image& im, const char* what) {
    if (im.c != 3 || im.h != h || im.w != w)
      throw InputError(std::string("make_eval_set: mixed resolutions in ") +
                       what);
  };
  for (const Image& im : id_images) check(im, "ID images");
  for (const Image& im : ood_images) check(im, "OOD images");

  EvalSet set;
  for (std::size_t i = 0; i < id_images.size(); ++i) {
    EvalItem item;
    item.image = id_images[i];
    item.label = 1;
    item.id = id_names ? (*id_names)[i] : "id_" + std::to_string(i);
    set.items.push_back(std::move(item));
  }
  set.n_id = static_cast<int>(id_images.size());

  std::vector<std::size_t> idx(ood_images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t keep =
      std::min<std::size_t>(ood_images.size(), static_cast<std::size_t>(cap));
  if (keep < idx.size()) {
    Rng rng(derive_seed(seed, stream::kEvalSampling));
    for (std::size_t i = 0; i < keep; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(
                                    rng.next_u64() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
  }
  for (std::size_t i : idx) {
    EvalItem item;
    item.image = ood_images[i];
    item.label = 0;
    item.id = ood_names ? (*ood_names)[i] : "ood_" + std::to_string(i);
    set.items.push_back(std::move(item));
  }
  set.n_ood = static_cast<int>(idx.size());
  return set;
}

}  // namespace depthood
