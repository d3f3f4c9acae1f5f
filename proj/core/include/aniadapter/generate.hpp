#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aniadapter/attention.hpp"
#include "aniadapter/denoiser.hpp"
#include "aniadapter/encoder.hpp"
#include "aniadapter/image.hpp"
#include "aniadapter/pose.hpp"
#include "aniadapter/trainer.hpp"

namespace aniadapter {

struct GenerationRequest {
    Image reference;
    std::string reference_id = "ref";
    PixelMask reference_mask;  // empty -> every token foreground
    std::string prompt;
    std::optional<PoseSkeleton> pose;

    struct ExtraRef {
        Image image;
        std::string id;
        PixelMask mask;
        double gamma = 1.0;
    };
    std::vector<ExtraRef> extra_refs;

    int samples = 1;
    double guidance = 1.0;  // 1 disables the unconditional pass
    uint64_t seed = 0;
    bool use_adapter = true;  // false reproduces the base model exactly
};

struct GenerationResult {
    std::vector<Image> images;   // clamped to [0,1]
    std::vector<Mat> latents;    // raw sampler outputs
};

// Deterministic DDIM sampler around a loaded adapter checkpoint. References
// are encoded once per request and reused across samples and timesteps;
// masking runs in multiplicative inference mode.
class InferencePipeline {
public:
    InferencePipeline(LoadedCheckpoint checkpoint, VisionBackend& vision, TextBackend& text,
                      SurrogateDenoiser& denoiser, PoseController& controller,
                      const NoiseSchedule& schedule);

    GenerationResult generate(const GenerationRequest& request);

    const TrainerConfig& checkpoint_config() const { return ckpt_.cfg; }
    InjectionConfig& injection_config() { return icfg_; }

private:
    MaskedReference encode_reference(const Image& image, const std::string& id,
                                     const PixelMask& mask, double gamma);

    LoadedCheckpoint ckpt_;
    VisionBackend& vision_;
    TextBackend& text_;
    SurrogateDenoiser& denoiser_;
    PoseController& controller_;
    NoiseSchedule schedule_;
    InjectionConfig icfg_;
};

}  // namespace aniadapter
