#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aniadapter/attention.hpp"
#include "aniadapter/denoiser.hpp"
#include "aniadapter/encoder.hpp"
#include "aniadapter/manifest.hpp"
#include "aniadapter/schedule.hpp"
#include "aniadapter/text_encoder.hpp"
#include "aniadapter/trainer.hpp"

namespace aniadapter {

// The deterministic surrogate backend set; every weight derives from
// cfg.seed, so a checkpoint carrying that seed reproduces the exact stack.
struct SurrogateStack {
    UnetSpec unet;
    std::unique_ptr<SurrogateVisionEncoder> vision;
    std::unique_ptr<SurrogateTextEncoder> text;
    std::unique_ptr<SurrogateDenoiser> denoiser;
    std::unique_ptr<PoseController> controller;
    NoiseSchedule schedule = NoiseSchedule::geometric();
};

inline SurrogateStack make_surrogate_stack(const TrainerConfig& cfg) {
    SurrogateStack s;
    s.unet = UnetSpec::surrogate_default();
    uint64_t seed = cfg.seed;
    s.vision = std::make_unique<SurrogateVisionEncoder>(
        cfg.encoder, Rng(seed).fork("vision").next_u64());
    s.text = std::make_unique<SurrogateTextEncoder>(s.unet.query_dim,
                                                    Rng(seed).fork("text").next_u64());
    s.denoiser = std::make_unique<SurrogateDenoiser>(s.unet, cfg.latent_h, cfg.latent_w,
                                                     Rng(seed).fork("denoiser").next_u64());
    s.controller = std::make_unique<PoseController>(cfg.controller, s.unet, s.unet.query_dim,
                                                    Rng(seed).fork("controller").next_u64());
    s.schedule = cfg.schedule_kind == "linear" ? NoiseSchedule::linear(cfg.schedule_T, 1e-4, 0.02)
                                               : NoiseSchedule::geometric(cfg.schedule_T);
    return s;
}

inline std::string resolve_asset_path(const std::string& path, const std::string& root) {
    if (path.empty() || path.front() == '/' || root.empty()) return path;
    return root + "/" + path;
}

// Materializes manifest rows into trainer inputs; images and masks are
// resized to the encoder input if needed, and a missing pose becomes an
// all-undetected skeleton (zero controller signal).
inline std::vector<TrainingSample> load_training_samples(
    const std::vector<ManifestEntry>& entries, const std::string& asset_root,
    const EncoderSpec& spec) {
    std::vector<TrainingSample> samples;
    for (const ManifestEntry& entry : entries) {
        if (entry.image_path.empty() || entry.mask_path.empty()) continue;
        TrainingSample s;
        s.id = entry.id;
        Image img = read_pgm(resolve_asset_path(entry.image_path, asset_root));
        if (img.height != spec.image_h || img.width != spec.image_w)
            img = resize_nearest(img, spec.image_h, spec.image_w);
        PixelMask mask = read_mask_png(resolve_asset_path(entry.mask_path, asset_root));
        if (mask.height != spec.image_h || mask.width != spec.image_w)
            mask = resize_nearest(mask, spec.image_h, spec.image_w);
        s.image = std::move(img);
        s.mask = pixel_mask_to_token_mask(mask, spec);
        if (!entry.pose_path.empty())
            s.skeleton = PoseSkeleton::load(resolve_asset_path(entry.pose_path, asset_root));
        s.prompt = render_prompt(entry.prompts.training);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace aniadapter
