#include "aniadapter/generate.hpp"

#include <algorithm>

#include "aniadapter/diffusion.hpp"
#include "aniadapter/error.hpp"

namespace aniadapter {

InferencePipeline::InferencePipeline(LoadedCheckpoint checkpoint, VisionBackend& vision,
                                     TextBackend& text, SurrogateDenoiser& denoiser,
                                     PoseController& controller, const NoiseSchedule& schedule)
    : ckpt_(std::move(checkpoint)),
      vision_(vision),
      text_(text),
      denoiser_(denoiser),
      controller_(controller),
      schedule_(schedule) {
    if (ckpt_.cfg.encoder != vision_.spec())
        throw DataError("checkpoint encoder spec does not match vision backend");
    for (const auto& s : ckpt_.state.sites.sites())
        if (!denoiser_.unet().sites.empty() &&
            std::none_of(denoiser_.unet().sites.begin(), denoiser_.unet().sites.end(),
                         [&](const SiteInfo& info) { return info.id == s.info.id; }))
            throw DataError("checkpoint site " + s.info.id + " unknown to this denoiser");
    icfg_.gamma = ckpt_.cfg.gamma;
    icfg_.neg_bias = ckpt_.cfg.neg_bias;
    icfg_.mode = MaskMode::infer_multiplicative;
    icfg_.scope = ckpt_.cfg.scope;
}

MaskedReference InferencePipeline::encode_reference(const Image& image, const std::string& id,
                                                    const PixelMask& mask, double gamma) {
    LayerStack stack = vision_.encode(image, id);
    MaskedReference mr;
    mr.ref.tokens = aggregate(stack, ckpt_.state.agg);
    mr.ref.source_id = id;
    if (mask.height > 0) {
        mr.mask = pixel_mask_to_token_mask(mask, ckpt_.cfg.encoder, 0.5,
                                           icfg_.class_token_foreground);
    } else {
        mr.mask.m = Vec::Ones(mr.ref.tokens.rows());
        mr.mask.origin = "all-foreground";
    }
    mr.gamma = gamma;
    return mr;
}

GenerationResult InferencePipeline::generate(const GenerationRequest& request) {
    if (request.samples < 1) throw DataError("sample count must be >= 1");
    if (request.guidance <= 0.0) throw DataError("guidance weight must be positive");

    std::vector<MaskedReference> refs;
    if (request.use_adapter) {
        refs.push_back(encode_reference(request.reference, request.reference_id,
                                        request.reference_mask, 1.0));
        for (const auto& extra : request.extra_refs)
            refs.push_back(encode_reference(extra.image, extra.id, extra.mask, extra.gamma));
    }

    // The unconditional pass zeroes the reference tokens and drops the prompt,
    // mirroring the training-time condition dropout.
    std::vector<MaskedReference> uncond_refs = refs;
    for (auto& mr : uncond_refs)
        mr.ref.tokens = Mat::Zero(mr.ref.tokens.rows(), mr.ref.tokens.cols());

    Mat text_cond = text_.encode(request.prompt);
    Mat text_uncond = text_.encode("");

    std::map<std::string, Vec> residuals;
    if (request.pose && controller_.kind() != ControllerKind::none)
        residuals = controller_.residuals(*request.pose);

    GenerationResult result;
    for (int s = 0; s < request.samples; ++s) {
        Rng rng = Rng(request.seed).fork("sample " + std::to_string(s));
        Mat x = random_matrix(rng, denoiser_.latent_h(), denoiser_.latent_w());
        for (int t = schedule_.T(); t >= 1; --t) {
            Mat eps = denoiser_.predict_eps(x, t, schedule_, text_cond, refs, ckpt_.state.sites,
                                            icfg_, residuals);
            if (request.guidance != 1.0) {
                Mat eps_u = denoiser_.predict_eps(x, t, schedule_, text_uncond, uncond_refs,
                                                  ckpt_.state.sites, icfg_, residuals);
                eps = cfg_combine(eps, eps_u, request.guidance);
            }
            x = ddim_step(x, eps, t, schedule_);
        }
        result.latents.push_back(x);
        result.images.push_back(Image::from_matrix(x, /*clamp=*/true));
    }
    return result;
}

}  // namespace aniadapter
