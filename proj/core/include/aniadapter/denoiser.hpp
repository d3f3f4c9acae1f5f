#pragma once

#include <map>
#include <string>
#include <vector>

#include "aniadapter/attention.hpp"
#include "aniadapter/pose.hpp"
#include "aniadapter/schedule.hpp"
#include "aniadapter/sites.hpp"

namespace aniadapter {

enum class ControllerKind { none, t2i_adapter, controlnet };

const char* controller_kind_name(ControllerKind k);
ControllerKind controller_kind_from_name(const std::string& name);

// Frozen structural conditioning. t2i_adapter contributes one residual at the
// denoiser input; controlnet contributes residuals at mid and up sites.
class PoseController {
public:
    PoseController(ControllerKind kind, const UnetSpec& unet, int dim, uint64_t seed);
    ControllerKind kind() const { return kind_; }

    // Residual rows keyed by "input" or a site id; empty map for kind none.
    std::map<std::string, Vec> residuals(const PoseSkeleton& skeleton) const;

    void hash_parameters(std::map<std::string, uint64_t>& out, const std::string& prefix) const;
    // Test hook for the freeze audit: deliberate mutation.
    Mat& mutable_weight(const std::string& key);

private:
    ControllerKind kind_ = ControllerKind::none;
    int dim_ = 0;
    std::map<std::string, Mat> w_;  // (3*kJointCount) -> dim projections
};

struct DenoiserCache {
    Vec x_col;
    int t = 0;
    double c2 = 0.0;
    std::vector<Mat> h_pre;                  // hidden state entering each site
    std::vector<InjectionCache> site_caches;
};

struct DenoiserGrads {
    std::map<std::string, std::pair<Mat, Mat>> dsites;  // site id -> (dWk, dWv)
    std::vector<Mat> dI;                                // per reference
};

// Toy latent U-Net stand-in: a frozen token trunk whose cross-attention sites
// accept image-branch injection. eps_hat folds a skip so that the predicted
// clean sample equals the trunk output field, which keeps reconstruction
// learnable through the adapter alone.
class SurrogateDenoiser {
public:
    SurrogateDenoiser(const UnetSpec& unet, int latent_h, int latent_w, uint64_t seed);

    const UnetSpec& unet() const { return unet_; }
    int latent_h() const { return lh_; }
    int latent_w() const { return lw_; }

    Mat predict_eps(const Mat& x_t, int t, const NoiseSchedule& schedule, const Mat& text_tokens,
                    const std::vector<MaskedReference>& refs, const InjectionSites& sites,
                    const InjectionConfig& cfg,
                    const std::map<std::string, Vec>& controller_residuals,
                    DenoiserCache* cache = nullptr) const;

    DenoiserGrads backward(const DenoiserCache& cache, const InjectionSites& sites,
                           const InjectionConfig& cfg, const Mat& d_eps_hat) const;

    void hash_parameters(std::map<std::string, uint64_t>& out, const std::string& prefix) const;

private:
    UnetSpec unet_;
    int lh_, lw_, d_;
    Mat pos_;             // M x d, frozen positional field
    Vec w_in_, w_out_;    // d, constructed orthogonal to each other
    Vec temb_freq_, temb_phase_;
    std::map<std::string, std::pair<Mat, Mat>> text_proj_;  // per-site K/V maps

    Mat initial_hidden(const Vec& x_col, int t,
                       const std::map<std::string, Vec>& controller_residuals) const;
};

}  // namespace aniadapter
