#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "depthood/dataset.hpp"
#include "depthood/loss.hpp"
#include "depthood/model.hpp"
#include "depthood/recon.hpp"

namespace depthood {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 0;
  double lambda = 1.0;  // joint-loss weight, Sim only
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw InputError("learning rate must be positive");
  if (cfg.batch_size < 1) throw InputError("batch size must be >= 1");
  if (cfg.epochs < 1) throw InputError("epochs must be >= 1");
}

struct TrainLog {
  std::vector<double> epoch_loss;                    // one entry per epoch
  std::map<std::string, std::string> final_digests;  // group name -> hex
};

namespace detail {

inline void check_uniform_resolution(const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw InputError("training dataset is empty");
  const int h = scenes[0].image.h, w = scenes[0].image.w;
  for (const Scene& s : scenes) {
    if (s.image.c != 3 || s.image.h != h || s.image.w != w ||
        s.depth.h != h || s.depth.w != w || s.depth.c != 1)
      throw InputError("training dataset mixes resolutions");
  }
}

inline std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  return order;
}

// Per-sample gradient buffers; reduced in sample order so results do not
// depend on thread scheduling.
inline void reduce_sample_grads(std::vector<std::vector<float>>& per_sample,
                                int nb, std::vector<float>& out) {
  std::fill(out.begin(), out.end(), 0.0f);
  for (int i = 0; i < nb; ++i) {
    const std::vector<float>& g = per_sample[i];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Toy depth model training (plain / heteroscedastic / dropout).
// ---------------------------------------------------------------------------

inline std::pair<DepthModel, TrainLog> train_depth_model(
    const std::vector<Scene>& dataset, const TrainConfig& cfg, Variant variant,
    float d_max = 10.0f) {
  validate_train_config(cfg);
  detail::check_uniform_resolution(dataset);
  const int h = dataset[0].image.h, w = dataset[0].image.w;

  DepthModel model = make_reference_model(variant, d_max, h, w, cfg.seed);
  auto enc_groups = param_vectors(model.encoder);
  auto dec_groups = param_vectors(model.decoder);
  std::vector<std::vector<float>*> groups = enc_groups;
  groups.insert(groups.end(), dec_groups.begin(), dec_groups.end());
  const std::size_t enc_size =
      total_param_count(param_vectors(std::as_const(model).encoder));
  std::size_t total = enc_size;
  for (auto* g : dec_groups) total += g->size();

  Adam adam;
  adam.lr = cfg.lr;
  adam.init(total);

  const std::size_t n = dataset.size();
  const int bs = cfg.batch_size;
  std::vector<std::vector<float>> sample_grads(bs,
                                               std::vector<float>(total));
  std::vector<float> grad(total);
  std::vector<double> sample_loss(bs);
  Rng shuffle_rng(derive_seed(cfg.seed, stream::kShuffle));

  // Shake out shape errors before entering the parallel region.
  (void)decode_depth(model, encode(model, dataset[0].image));

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(n, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const int nb = static_cast<int>(std::min<std::size_t>(bs, n - start));
      const double wgt = 1.0 / nb;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < nb; ++i) {
        const Scene& scene = dataset[order[start + i]];
        FeaturePyramid z = encoder_forward(model.encoder, scene.image);
        DecoderCache dc;
        Rng drop_rng(derive_seed(cfg.seed, stream::kDropoutTrain,
                                 static_cast<std::uint64_t>(epoch),
                                 order[start + i]));
        Tensor depth = decoder_forward(
            model.decoder, z, &dc,
            variant == Variant::dropout ? &drop_rng : nullptr);

        std::fill(sample_grads[i].begin(), sample_grads[i].end(), 0.0f);
        float* genc = sample_grads[i].data();
        float* gdec = genc + enc_size;
        std::vector<Tensor> gz;
        for (const Tensor& lvl : z.levels) gz.emplace_back(lvl.c, lvl.h, lvl.w);

        if (variant == Variant::heteroscedastic) {
          sample_loss[i] = depth_loss_laplace(depth, scene.depth, dc.scale);
          Tensor gd, gb;
          depth_loss_laplace_grad(depth, scene.depth, dc.scale, gd, gb, wgt);
          decoder_backward(model.decoder, z, dc, gd, &gb, gdec, &gz);
        } else {
          sample_loss[i] = depth_loss_plain(depth, scene.depth);
          Tensor gd = depth_loss_plain_grad(depth, scene.depth, wgt);
          decoder_backward(model.decoder, z, dc, gd, nullptr, gdec, &gz);
        }
        encoder_backward(model.encoder, scene.image, z, gz, genc);
      }
      detail::reduce_sample_grads(sample_grads, nb, grad);
      adam.step(groups, grad.data());
      for (int i = 0; i < nb; ++i) loss_sum += sample_loss[i];
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  log.final_digests["encoder"] = encoder_digest(model).hex();
  log.final_digests["depth_decoder"] = depth_decoder_digest(model).hex();
  return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Post-hoc image decoder training: gradients flow only through the decoder.
// ---------------------------------------------------------------------------

inline std::pair<ImageDecoder, TrainLog> train_image_decoder(
    const DepthModel& model, const std::vector<Image>& images,
    const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (images.empty()) throw InputError("training dataset is empty");
  for (const Image& im : images)
    if (im.c != 3 || im.h != model.res_h || im.w != model.res_w)
      throw InputError("image resolution does not match model resolution");

  ImageDecoder dec = build_image_decoder(blueprint(model), cfg.seed);
  auto groups = param_vectors(dec.dec);
  std::size_t total = 0;
  for (auto* g : groups) total += g->size();

  // The encoder is fixed, so its features can be computed once.
  const std::size_t n = images.size();
  std::vector<FeaturePyramid> pyramids(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i)
    pyramids[i] = encoder_forward(model.encoder, images[i]);

  Adam adam;
  adam.lr = cfg.lr;
  adam.init(total);
  const int bs = cfg.batch_size;
  std::vector<std::vector<float>> sample_grads(bs,
                                               std::vector<float>(total));
  std::vector<float> grad(total);
  std::vector<double> sample_loss(bs);
  Rng shuffle_rng(derive_seed(cfg.seed, stream::kShuffle));

  (void)reconstruct(dec, pyramids[0]);

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(n, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const int nb = static_cast<int>(std::min<std::size_t>(bs, n - start));
      const double wgt = 1.0 / nb;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < nb; ++i) {
        const std::size_t idx = order[start + i];
        DecoderCache dc;
        Tensor xhat = decoder_forward(dec.dec, pyramids[idx], &dc);
        sample_loss[i] = reconstruction_loss(xhat, images[idx]);
        Tensor g = reconstruction_loss_grad(xhat, images[idx], wgt);
        std::fill(sample_grads[i].begin(), sample_grads[i].end(), 0.0f);
        decoder_backward(dec.dec, pyramids[idx], dc, g, nullptr,
                         sample_grads[i].data(), nullptr);
      }
      detail::reduce_sample_grads(sample_grads, nb, grad);
      adam.step(groups, grad.data());
      for (int i = 0; i < nb; ++i) loss_sum += sample_loss[i];
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  log.final_digests["image_decoder"] = image_decoder_digest(dec).hex();
  log.final_digests["encoder"] = encoder_digest(model).hex();
  log.final_digests["depth_decoder"] = depth_decoder_digest(model).hex();
  return {std::move(dec), std::move(log)};
}

// ---------------------------------------------------------------------------
// Ablations: simultaneous (Sim) and autoencoder (AE) training.
// ---------------------------------------------------------------------------

struct JointResult {
  DepthModel model;
  ImageDecoder decoder;
  TrainLog log;
};

// Optimizes depth_loss + lambda * reconstruction_loss over encoder, depth
// decoder and image decoder together.
inline JointResult train_joint(const std::vector<Scene>& dataset,
                               const TrainConfig& cfg, float d_max = 10.0f) {
  validate_train_config(cfg);
  detail::check_uniform_resolution(dataset);
  const int h = dataset[0].image.h, w = dataset[0].image.w;
  const double lambda = cfg.lambda;

  JointResult res;
  res.model = make_reference_model(Variant::plain, d_max, h, w, cfg.seed);
  res.decoder = build_image_decoder(blueprint(res.model), cfg.seed);

  auto groups = param_vectors(res.model.encoder);
  auto dg = param_vectors(res.model.decoder);
  groups.insert(groups.end(), dg.begin(), dg.end());
  auto ig = param_vectors(res.decoder.dec);
  groups.insert(groups.end(), ig.begin(), ig.end());
  const std::size_t enc_size =
      total_param_count(param_vectors(std::as_const(res.model).encoder));
  std::size_t dec_size = 0;
  for (auto* g : dg) dec_size += g->size();
  std::size_t total = enc_size + dec_size;
  for (auto* g : ig) total += g->size();

  Adam adam;
  adam.lr = cfg.lr;
  adam.init(total);
  const std::size_t n = dataset.size();
  const int bs = cfg.batch_size;
  std::vector<std::vector<float>> sample_grads(bs,
                                               std::vector<float>(total));
  std::vector<float> grad(total);
  std::vector<double> sample_loss(bs);
  Rng shuffle_rng(derive_seed(cfg.seed, stream::kShuffle));

  (void)decode_depth(res.model, encode(res.model, dataset[0].image));

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(n, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const int nb = static_cast<int>(std::min<std::size_t>(bs, n - start));
      const double wgt = 1.0 / nb;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < nb; ++i) {
        const Scene& scene = dataset[order[start + i]];
        FeaturePyramid z = encoder_forward(res.model.encoder, scene.image);
        DecoderCache ddc;
        Tensor depth = decoder_forward(res.model.decoder, z, &ddc);

        std::fill(sample_grads[i].begin(), sample_grads[i].end(), 0.0f);
        float* genc = sample_grads[i].data();
        float* gdec = genc + enc_size;
        float* gidec = gdec + dec_size;
        std::vector<Tensor> gz;
        for (const Tensor& lvl : z.levels) gz.emplace_back(lvl.c, lvl.h, lvl.w);

        double loss = depth_loss_plain(depth, scene.depth);
        Tensor gd = depth_loss_plain_grad(depth, scene.depth, wgt);
        decoder_backward(res.model.decoder, z, ddc, gd, nullptr, gdec, &gz);

        if (lambda != 0.0) {
          DecoderCache idc;
          Tensor xhat = decoder_forward(res.decoder.dec, z, &idc);
          loss += lambda * reconstruction_loss(xhat, scene.image);
          Tensor gr = reconstruction_loss_grad(xhat, scene.image, lambda * wgt);
          decoder_backward(res.decoder.dec, z, idc, gr, nullptr, gidec, &gz);
        }
        encoder_backward(res.model.encoder, scene.image, z, gz, genc);
        sample_loss[i] = loss;
      }
      detail::reduce_sample_grads(sample_grads, nb, grad);
      adam.step(groups, grad.data());
      for (int i = 0; i < nb; ++i) loss_sum += sample_loss[i];
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  log.final_digests["encoder"] = encoder_digest(res.model).hex();
  log.final_digests["depth_decoder"] = depth_decoder_digest(res.model).hex();
  log.final_digests["image_decoder"] = image_decoder_digest(res.decoder).hex();
  res.log = std::move(log);
  return res;
}

struct AutoencoderResult {
  Encoder encoder;
  ImageDecoder decoder;
  TrainLog log;
};

// Encoder + image decoder trained from scratch purely for reconstruction.
// No depth decoder exists in this setup.
inline AutoencoderResult train_autoencoder(const std::vector<Image>& images,
                                           const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (images.empty()) throw InputError("training dataset is empty");
  const int h = images[0].h, w = images[0].w;
  for (const Image& im : images)
    if (im.c != 3 || im.h != h || im.w != w)
      throw InputError("training dataset mixes resolutions");
  if (h % 16 != 0 || w % 16 != 0)
    throw InputError("resolution must be a multiple of 16");

  AutoencoderResult res;
  Rng enc_rng(derive_seed(cfg.seed, stream::kEncoderInit));
  res.encoder = make_encoder(enc_rng);
  res.decoder = build_image_decoder(reference_blueprint(true), cfg.seed);

  auto groups = param_vectors(res.encoder);
  auto ig = param_vectors(res.decoder.dec);
  groups.insert(groups.end(), ig.begin(), ig.end());
  const std::size_t enc_size =
      total_param_count(param_vectors(std::as_const(res.encoder)));
  std::size_t total = enc_size;
  for (auto* g : ig) total += g->size();

  Adam adam;
  adam.lr = cfg.lr;
  adam.init(total);
  const std::size_t n = images.size();
  const int bs = cfg.batch_size;
  std::vector<std::vector<float>> sample_grads(bs,
                                               std::vector<float>(total));
  std::vector<float> grad(total);
  std::vector<double> sample_loss(bs);
  Rng shuffle_rng(derive_seed(cfg.seed, stream::kShuffle));

  (void)reconstruct(res.decoder, encoder_forward(res.encoder, images[0]));

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(n, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const int nb = static_cast<int>(std::min<std::size_t>(bs, n - start));
      const double wgt = 1.0 / nb;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < nb; ++i) {
        const Image& img = images[order[start + i]];
        FeaturePyramid z = encoder_forward(res.encoder, img);
        DecoderCache dc;
        Tensor xhat = decoder_forward(res.decoder.dec, z, &dc);
        sample_loss[i] = reconstruction_loss(xhat, img);
        Tensor g = reconstruction_loss_grad(xhat, img, wgt);
        std::fill(sample_grads[i].begin(), sample_grads[i].end(), 0.0f);
        float* genc = sample_grads[i].data();
        float* gdec = genc + enc_size;
        std::vector<Tensor> gz;
        for (const Tensor& lvl : z.levels) gz.emplace_back(lvl.c, lvl.h, lvl.w);
        decoder_backward(res.decoder.dec, z, dc, g, nullptr, gdec, &gz);
        encoder_backward(res.encoder, img, z, gz, genc);
      }
      detail::reduce_sample_grads(sample_grads, nb, grad);
      adam.step(groups, grad.data());
      for (int i = 0; i < nb; ++i) loss_sum += sample_loss[i];
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  log.final_digests["encoder"] =
      snapshot_weights(param_vectors(std::as_const(res.encoder))).hex();
  log.final_digests["image_decoder"] = image_decoder_digest(res.decoder).hex();
  res.log = std::move(log);
  return res;
}

}  // namespace depthood
