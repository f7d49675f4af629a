#pragma once

#include <cstdint>

#include "depthood/model.hpp"

namespace depthood {

// Image decoder: a structural copy of the depth decoder with the head changed
// to 3 output channels and the sigmoid removed, trained from scratch.
struct ImageDecoder {
  Decoder dec;
  std::uint64_t seed = 0;
};

inline ImageDecoder build_image_decoder(const DecoderBlueprint& bp,
                                        std::uint64_t seed) {
  validate_blueprint(bp);
  DecoderBlueprint mod = bp;
  mod.head.out_ch = 3;
  mod.head.activation = "none";
  ImageDecoder d;
  d.seed = seed;
  Rng rng(derive_seed(seed, stream::kImageDecoderInit));
  d.dec = make_decoder(mod, 1.0f, rng);
  return d;
}

// Unbounded reconstruction; downstream scoring consumes it unclamped.
inline Tensor reconstruct(const ImageDecoder& d, const FeaturePyramid& z) {
  return decoder_forward(d.dec, z);
}

inline DecoderBlueprint blueprint(const ImageDecoder& d) { return d.dec.bp; }

inline WeightDigest image_decoder_digest(const ImageDecoder& d) {
  return snapshot_weights(param_vectors(d.dec));
}

}  // namespace depthood
