#pragma once

#include <string>
#include <vector>

#include "aniadapter/clip_surrogate.hpp"
#include "aniadapter/image.hpp"
#include "aniadapter/pose.hpp"

namespace aniadapter {

// Cosine similarity of global embeddings after compositing both images onto
// white outside their masks. `computed_on_blank` reports when a mask had no
// foreground at all (the score then describes an all-white image).
double masked_clip_i(const Image& gen, const Image& ref, const PixelMask& gen_mask,
                     const PixelMask& ref_mask, EmbeddingBackend& encoder,
                     bool* computed_on_blank = nullptr);

// Mean pairwise distance over the 6 unordered pairs of exactly 4 samples.
double diversity(const std::vector<Image>& samples, DistanceBackend& lpips);

// Foreground-only PSNR in dB against a peak of 1.0, capped at 100.
double psnr(const Image& gen, const Image& ref, const PixelMask& mask);

// Fréchet distance between Gaussian fits of the two feature sets. Covariances
// get a fixed 1e-6 diagonal jitter so degenerate sets stay well-posed.
double frechet_distance(const std::vector<Vec>& feats_a, const std::vector<Vec>& feats_b);

// frechet_distance over embeddings of white-composited images.
double fid(const std::vector<Image>& set_a, const std::vector<PixelMask>& masks_a,
           const std::vector<Image>& set_b, const std::vector<PixelMask>& masks_b,
           EmbeddingBackend& encoder);

double clip_t(const Image& gen, const std::string& prompt, EmbeddingBackend& encoder);

struct AkdMkr {
    double akd = 0.0;
    double mkr = 0.0;
    bool valid = false;      // false when cond has zero detected joints
    bool akd_valid = false;  // false when no joint is detected in both
};

// akd: mean Euclidean distance over joints detected in both skeletons
// (normalized coordinates). mkr: fraction of cond-detected joints missing
// from gen.
AkdMkr akd_mkr(const PoseSkeleton& gen, const PoseSkeleton& cond);

// Fraction of skeletons with fewer than min_joints detected joints.
double failure_rate(const std::vector<PoseSkeleton>& gen_skeletons, int min_joints = 4);

}  // namespace aniadapter
