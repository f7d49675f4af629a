#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthood/digest.hpp"
#include "depthood/error.hpp"
#include "depthood/nn.hpp"
#include "depthood/rng.hpp"
#include "depthood/tensor.hpp"

namespace depthood {

enum class Variant { plain, heteroscedastic, dropout };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::heteroscedastic: return "heteroscedastic";
    case Variant::dropout: return "dropout";
  }
  return "plain";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "heteroscedastic") return Variant::heteroscedastic;
  if (s == "dropout") return Variant::dropout;
  throw ConfigError("unknown model variant: " + s);
}

// ---------------------------------------------------------------------------
// Decoder blueprint: the introspectable description of a decoder's main path.
// ---------------------------------------------------------------------------

struct DecoderBlock {
  int upsample = 2;
  int ksize = 3;
  int in_ch = 0;       // conv input channels, after upsample + skip concat
  int out_ch = 0;
  int skip_level = 0;  // encoder pyramid level feeding this block, 0 = none
  std::string activation = "relu";

  bool operator==(const DecoderBlock&) const = default;
};

struct DecoderHead {
  int ksize = 3;
  int in_ch = 0;
  int out_ch = 1;
  std::string activation = "sigmoid";  // "sigmoid" (scaled) or "none"

  bool operator==(const DecoderHead&) const = default;
};

struct DecoderBlueprint {
  std::vector<DecoderBlock> blocks;
  DecoderHead head;

  bool operator==(const DecoderBlueprint&) const = default;
};

inline void validate_blueprint(const DecoderBlueprint& bp) {
  if (bp.blocks.empty()) throw InputError("inconsistent blueprint: no blocks");
  for (std::size_t i = 0; i < bp.blocks.size(); ++i) {
    const DecoderBlock& b = bp.blocks[i];
    if (b.in_ch <= 0 || b.out_ch <= 0)
      throw InputError("inconsistent blueprint: non-positive channel count");
    if (b.upsample != 2)
      throw InputError("inconsistent blueprint: unsupported upsample factor");
    if (b.ksize < 1 || b.ksize % 2 == 0)
      throw InputError("inconsistent blueprint: kernel size must be odd");
    if (b.activation != "relu")
      throw InputError("inconsistent blueprint: unsupported block activation " +
                       b.activation);
    if (i > 0) {
      const int prev = bp.blocks[i - 1].out_ch;
      if (b.skip_level == 0 && b.in_ch != prev)
        throw InputError("inconsistent blueprint: block channel chain broken");
      if (b.skip_level != 0 && b.in_ch <= prev)
        throw InputError(
            "inconsistent blueprint: skip block must widen its input");
    }
  }
  if (bp.head.in_ch != bp.blocks.back().out_ch)
    throw InputError("inconsistent blueprint: head input channels mismatch");
  if (bp.head.out_ch <= 0)
    throw InputError("inconsistent blueprint: head output channels");
  if (bp.head.activation != "sigmoid" && bp.head.activation != "none")
    throw InputError("inconsistent blueprint: unsupported head activation " +
                     bp.head.activation);
}

// ---------------------------------------------------------------------------
// Encoder: fixed chain of stride-2 conv blocks, ReLU, one pyramid level each.
// ---------------------------------------------------------------------------

struct Encoder {
  int in_ch = 3;
  std::vector<int> widths{16, 32, 64, 128};
  std::vector<Conv> blocks;
};

inline Encoder make_encoder(Rng& rng, const std::vector<int>& widths = {16, 32,
                                                                        64,
                                                                        128},
                            int in_ch = 3) {
  Encoder e;
  e.in_ch = in_ch;
  e.widths = widths;
  int c = in_ch;
  for (int wch : widths) {
    Conv conv = make_conv(c, wch, 3, 2, 1);
    init_conv(conv, rng);
    e.blocks.push_back(std::move(conv));
    c = wch;
  }
  return e;
}

inline FeaturePyramid encoder_forward(const Encoder& enc, const Image& x) {
  FeaturePyramid z;
  const Tensor* cur = &x;
  for (const Conv& c : enc.blocks) {
    Tensor t = conv_forward(c, *cur);
    relu_inplace(t);
    z.levels.push_back(std::move(t));
    cur = &z.levels.back();
  }
  return z;
}

inline std::vector<const std::vector<float>*> param_vectors(
    const Encoder& e) {
  std::vector<const std::vector<float>*> out;
  for (const Conv& c : e.blocks) {
    out.push_back(&c.w);
    out.push_back(&c.b);
  }
  return out;
}

inline std::vector<std::vector<float>*> param_vectors(Encoder& e) {
  std::vector<std::vector<float>*> out;
  for (Conv& c : e.blocks) {
    out.push_back(&c.w);
    out.push_back(&c.b);
  }
  return out;
}

// Gradient of the pyramid -> gradient of encoder params (accumulated into
// gbase, laid out in canonical order). gz must have one entry per level.
inline void encoder_backward(const Encoder& enc, const Image& input,
                             const FeaturePyramid& z,
                             const std::vector<Tensor>& gz, float* gbase) {
  std::vector<std::size_t> off(enc.blocks.size());
  std::size_t acc = 0;
  for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
    off[i] = acc;
    acc += enc.blocks[i].param_count();
  }
  const int m = static_cast<int>(enc.blocks.size());
  Tensor g = gz[m - 1];
  for (int j = m - 1; j >= 0; --j) {
    relu_backward_inplace(g, z.levels[j]);
    float* gw = gbase + off[j];
    float* gb = gw + enc.blocks[j].weight_count();
    Tensor gin;
    const Tensor& in = (j == 0) ? input : z.levels[j - 1];
    conv_backward(enc.blocks[j], in, g, gw, gb, j > 0 ? &gin : nullptr);
    if (j > 0) {
      for (std::size_t i = 0; i < gin.v.size(); ++i)
        gin.v[i] += gz[j - 1].v[i];
      g = std::move(gin);
    }
  }
}

// ---------------------------------------------------------------------------
// Decoder: blueprint-driven upsample/concat/conv chain with a conv head.
// ---------------------------------------------------------------------------

struct Decoder {
  DecoderBlueprint bp;
  float d_max = 10.0f;    // scale of the sigmoid head
  float dropout_p = 0.0f; // > 0 only for the dropout variant
  std::vector<Conv> blocks;
  Conv head;
  std::optional<Conv> scale_head;  // heteroscedastic variant only
};

inline Decoder make_decoder(const DecoderBlueprint& bp, float d_max, Rng& rng,
                            float dropout_p = 0.0f,
                            bool heteroscedastic = false) {
  validate_blueprint(bp);
  Decoder d;
  d.bp = bp;
  d.d_max = d_max;
  d.dropout_p = dropout_p;
  for (const DecoderBlock& b : bp.blocks) {
    Conv c = make_conv(b.in_ch, b.out_ch, b.ksize, 1, b.ksize / 2);
    init_conv(c, rng);
    d.blocks.push_back(std::move(c));
  }
  d.head = make_conv(bp.head.in_ch, bp.head.out_ch, bp.head.ksize, 1,
                     bp.head.ksize / 2);
  init_conv(d.head, rng);
  if (heteroscedastic) {
    Conv s = make_conv(bp.head.in_ch, 1, bp.head.ksize, 1, bp.head.ksize / 2);
    init_conv(s, rng);
    d.scale_head = std::move(s);
  }
  return d;
}

inline std::vector<const std::vector<float>*> param_vectors(
    const Decoder& d) {
  std::vector<const std::vector<float>*> out;
  for (const Conv& c : d.blocks) {
    out.push_back(&c.w);
    out.push_back(&c.b);
  }
  out.push_back(&d.head.w);
  out.push_back(&d.head.b);
  if (d.scale_head) {
    out.push_back(&d.scale_head->w);
    out.push_back(&d.scale_head->b);
  }
  return out;
}

inline std::vector<std::vector<float>*> param_vectors(Decoder& d) {
  std::vector<std::vector<float>*> out;
  for (Conv& c : d.blocks) {
    out.push_back(&c.w);
    out.push_back(&c.b);
  }
  out.push_back(&d.head.w);
  out.push_back(&d.head.b);
  if (d.scale_head) {
    out.push_back(&d.scale_head->w);
    out.push_back(&d.scale_head->b);
  }
  return out;
}

struct DecoderCache {
  std::vector<Tensor> cin;   // conv input per block (after upsample/concat)
  std::vector<Tensor> rout;  // block output after ReLU, before dropout
  std::vector<Tensor> flow;  // what actually feeds the next block
  std::vector<std::vector<std::uint8_t>> mask;  // dropout masks
  Tensor out;    // final activated output
  Tensor scale;  // heteroscedastic scale map (softplus output)
};

// Runs the decoder on a pyramid. Dropout fires only when the decoder has
// dropout_p > 0 and an RNG is supplied; inference without an RNG is
// deterministic. scale_out receives the Laplace scale map when present.
inline Tensor decoder_forward(const Decoder& dec, const FeaturePyramid& z,
                              DecoderCache* cache = nullptr,
                              Rng* dropout_rng = nullptr,
                              Tensor* scale_out = nullptr) {
  if (z.levels.empty()) throw InputError("decoder: empty feature pyramid");
  const int n = static_cast<int>(dec.blocks.size());
  const bool drop = dec.dropout_p > 0.0f && dropout_rng != nullptr;
  if (cache) {
    cache->cin.resize(n);
    cache->rout.resize(n);
    cache->flow.resize(n);
    cache->mask.assign(n, {});
  }
  Tensor cur = z.top();
  for (int i = 0; i < n; ++i) {
    const DecoderBlock& spec = dec.bp.blocks[i];
    Tensor up = upsample2x_nearest(cur);
    Tensor cin;
    if (spec.skip_level != 0) {
      const int idx = spec.skip_level - 1;
      if (idx < 0 || idx >= z.count())
        throw InputError("decoder: skip level refers to a missing pyramid level");
      const Tensor& skip = z.levels[idx];
      if (skip.h != up.h || skip.w != up.w)
        throw InputError("decoder: pyramid shape mismatch at skip level " +
                         std::to_string(spec.skip_level));
      cin = concat_channels(up, skip);
    } else {
      cin = std::move(up);
    }
    if (cin.c != dec.blocks[i].in_ch)
      throw InputError("decoder: pyramid shape mismatch (block " +
                       std::to_string(i) + " expects " +
                       std::to_string(dec.blocks[i].in_ch) + " channels, got " +
                       std::to_string(cin.c) + ")");
    Tensor out = conv_forward(dec.blocks[i], cin);
    relu_inplace(out);
    if (cache) {
      cache->cin[i] = std::move(cin);
      cache->rout[i] = out;
    }
    if (drop) {
      std::vector<std::uint8_t> mask;
      dropout_forward_inplace(out, dec.dropout_p, *dropout_rng, mask);
      if (cache) cache->mask[i] = std::move(mask);
    }
    if (cache) cache->flow[i] = out;
    cur = std::move(out);
  }
  if (dec.scale_head) {
    Tensor s = conv_forward(*dec.scale_head, cur);
    softplus_inplace(s);
    if (cache) cache->scale = s;
    if (scale_out) *scale_out = std::move(s);
  }
  Tensor y = conv_forward(dec.head, cur);
  if (dec.bp.head.activation == "sigmoid") sigmoid_scale_inplace(y, dec.d_max);
  if (cache) cache->out = y;
  return y;
}

// Backward pass. gout is dL/d(output); gscale, when non-null, is dL/d(scale).
// Parameter gradients accumulate into gbase (canonical decoder layout). When
// gz is non-null it must hold zero tensors shaped like the pyramid levels and
// receives dL/dz.
inline void decoder_backward(const Decoder& dec, const FeaturePyramid& z,
                             const DecoderCache& cache, const Tensor& gout,
                             const Tensor* gscale, float* gbase,
                             std::vector<Tensor>* gz = nullptr) {
  const int n = static_cast<int>(dec.blocks.size());
  std::vector<std::size_t> off(n);
  std::size_t acc = 0;
  for (int i = 0; i < n; ++i) {
    off[i] = acc;
    acc += dec.blocks[i].param_count();
  }
  const std::size_t off_head = acc;
  const std::size_t off_scale = off_head + dec.head.param_count();
  const bool drop = dec.dropout_p > 0.0f && !cache.mask.empty() &&
                    !cache.mask[0].empty();

  Tensor g = gout;
  if (dec.bp.head.activation == "sigmoid")
    sigmoid_scale_backward_inplace(g, cache.out, dec.d_max);
  Tensor gflow;
  conv_backward(dec.head, cache.flow[n - 1], g, gbase + off_head,
                gbase + off_head + dec.head.weight_count(), &gflow);
  if (dec.scale_head && gscale) {
    Tensor gs = *gscale;
    softplus_backward_inplace(gs, cache.scale);
    Tensor gflow2;
    conv_backward(*dec.scale_head, cache.flow[n - 1], gs, gbase + off_scale,
                  gbase + off_scale + dec.scale_head->weight_count(), &gflow2);
    for (std::size_t i = 0; i < gflow.v.size(); ++i) gflow.v[i] += gflow2.v[i];
  }

  for (int i = n - 1; i >= 0; --i) {
    if (drop) dropout_backward_inplace(gflow, dec.dropout_p, cache.mask[i]);
    relu_backward_inplace(gflow, cache.rout[i]);
    Tensor gcin;
    conv_backward(dec.blocks[i], cache.cin[i], gflow, gbase + off[i],
                  gbase + off[i] + dec.blocks[i].weight_count(), &gcin);
    const DecoderBlock& spec = dec.bp.blocks[i];
    Tensor gup;
    if (spec.skip_level != 0) {
      const int up_ch = (i == 0) ? z.top().c : dec.blocks[i - 1].out_ch;
      Tensor gskip;
      split_channels(gcin, up_ch, gup, gskip);
      if (gz) {
        Tensor& dst = (*gz)[spec.skip_level - 1];
        for (std::size_t k = 0; k < dst.v.size(); ++k) dst.v[k] += gskip.v[k];
      }
    } else {
      gup = std::move(gcin);
    }
    gflow = upsample2x_backward(gup);
  }
  if (gz) {
    Tensor& dst = gz->back();
    for (std::size_t k = 0; k < dst.v.size(); ++k) dst.v[k] += gflow.v[k];
  }
}

// ---------------------------------------------------------------------------
// The reference depth model.
// ---------------------------------------------------------------------------

struct DepthModel {
  Variant variant = Variant::plain;
  float d_max = 10.0f;
  int res_h = 64, res_w = 64;
  std::uint64_t seed = 0;
  bool use_skips = true;
  Encoder encoder;
  Decoder decoder;
};

struct DepthPrediction {
  DepthMap depth;
  Tensor scale;  // Laplace scale map, heteroscedastic variant only
  bool has_scale = false;
};

inline constexpr const char* kReferenceArch = "small_skip_convnet_v1";
inline const std::vector<int> kEncoderWidths{16, 32, 64, 128};
inline const std::vector<int> kDecoderWidths{64, 32, 16, 16};

// Blueprint of the reference depth decoder. Skips mirror the encoder levels
// 3/2/1; the last block runs at full resolution without a skip.
inline DecoderBlueprint reference_blueprint(bool use_skips = true) {
  DecoderBlueprint bp;
  int prev = kEncoderWidths.back();
  for (int i = 0; i < 4; ++i) {
    DecoderBlock b;
    b.out_ch = kDecoderWidths[i];
    b.skip_level = use_skips && i < 3 ? 3 - i : 0;
    const int skip_ch = b.skip_level ? kEncoderWidths[b.skip_level - 1] : 0;
    b.in_ch = prev + skip_ch;
    bp.blocks.push_back(b);
    prev = b.out_ch;
  }
  bp.head.in_ch = prev;
  bp.head.out_ch = 1;
  bp.head.activation = "sigmoid";
  return bp;
}

inline DepthModel make_reference_model(Variant variant, float d_max, int h,
                                       int w, std::uint64_t seed,
                                       bool use_skips = true) {
  if (h <= 0 || w <= 0 || h % 16 != 0 || w % 16 != 0)
    throw InputError("model resolution must be a positive multiple of 16");
  if (d_max <= 0.0f) throw InputError("d_max must be positive");
  DepthModel m;
  m.variant = variant;
  m.d_max = d_max;
  m.res_h = h;
  m.res_w = w;
  m.seed = seed;
  m.use_skips = use_skips;
  Rng enc_rng(derive_seed(seed, stream::kEncoderInit));
  m.encoder = make_encoder(enc_rng);
  Rng dec_rng(derive_seed(seed, stream::kDepthDecoderInit));
  m.decoder = make_decoder(reference_blueprint(use_skips), d_max, dec_rng,
                           variant == Variant::dropout ? 0.2f : 0.0f,
                           variant == Variant::heteroscedastic);
  return m;
}

inline FeaturePyramid encode(const DepthModel& m, const Image& x) {
  require_image(x, "encode");
  if (x.h != m.res_h || x.w != m.res_w)
    throw InputError("encode: input resolution " + std::to_string(x.w) + "x" +
                     std::to_string(x.h) + " does not match model resolution " +
                     std::to_string(m.res_w) + "x" + std::to_string(m.res_h));
  return encoder_forward(m.encoder, x);
}

inline DepthPrediction decode_depth(const DepthModel& m,
                                    const FeaturePyramid& z,
                                    Rng* dropout_rng = nullptr) {
  DepthPrediction p;
  Tensor scale;
  p.depth = decoder_forward(m.decoder, z, nullptr, dropout_rng,
                            m.decoder.scale_head ? &scale : nullptr);
  if (m.decoder.scale_head) {
    p.scale = std::move(scale);
    p.has_scale = true;
  }
  return p;
}

inline DecoderBlueprint blueprint(const DepthModel& m) { return m.decoder.bp; }

inline WeightDigest encoder_digest(const DepthModel& m) {
  return snapshot_weights(param_vectors(m.encoder));
}

inline WeightDigest depth_decoder_digest(const DepthModel& m) {
  return snapshot_weights(param_vectors(m.decoder));
}

inline std::size_t total_param_count(
    const std::vector<const std::vector<float>*>& groups) {
  std::size_t n = 0;
  for (const auto* g : groups) n += g->size();
  return n;
}

inline std::vector<float> flatten_params(
    const std::vector<const std::vector<float>*>& groups) {
  std::vector<float> out;
  out.reserve(total_param_count(groups));
  for (const auto* g : groups) out.insert(out.end(), g->begin(), g->end());
  return out;
}

inline void unflatten_params(const std::vector<float>& flat,
                             const std::vector<std::vector<float>*>& groups) {
  std::size_t pos = 0;
  for (auto* g : groups) {
    std::copy(flat.begin() + pos, flat.begin() + pos + g->size(), g->begin());
    pos += g->size();
  }
}

}  // namespace depthood
