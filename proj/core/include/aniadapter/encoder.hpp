#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aniadapter/image.hpp"
#include "aniadapter/linalg.hpp"
#include "aniadapter/rng.hpp"

namespace aniadapter {

struct EncoderSpec {
    int image_h = 224;
    int image_w = 224;
    int patch = 14;
    int hidden_dim = 16;  // D
    int layers = 4;       // L
    int k = 4;            // tail layers aggregated
    int target_dim = 16;  // D', cross-attention width

    bool operator==(const EncoderSpec&) const = default;
};

// 1 + H*W/p^2 (class token plus patch grid).
int patch_token_count(const EncoderSpec& spec);

// Token matrices for the last k layers, z[0] = z_L down to z[k-1] = z_{L-k+1}.
// Row 0 is the class token.
struct LayerStack {
    std::vector<Mat> z;
};

// Per-token binary gate over the N reference tokens. Entry 0 covers the class
// token.
struct TokenMask {
    Vec m;
    std::string origin;
};

struct AggregatorParams {
    Vec alphas;             // k
    std::vector<Mat> proj;  // k matrices, D x D'
    Vec ln_gamma, ln_beta;  // D'
    bool ln_bypass = false; // test hook: skip normalization

    static AggregatorParams init(const EncoderSpec& spec, Rng& rng);
};

struct ReferenceTokens {
    Mat tokens;  // N x D'
    std::string source_id;
    std::optional<TokenMask> mask;
};

struct AggregateCache {
    LayerStack stack;
    Mat pre_norm;            // sum before LN
    Mat normalized;          // (x - mu) / sqrt(var + eps), rows
    Vec inv_std;             // per row
};

// I = LN(sum_i alpha_i * z_i * W_i), row-wise LN with learnable affine.
Mat aggregate(const LayerStack& stack, const AggregatorParams& params,
              AggregateCache* cache = nullptr);

struct AggregateGrads {
    Vec dalphas;
    std::vector<Mat> dproj;
    Vec dln_gamma, dln_beta;
};

AggregateGrads aggregate_backward(const AggregateCache& cache, const AggregatorParams& params,
                                  const Mat& dout);

class VisionBackend {
public:
    virtual ~VisionBackend() = default;
    virtual const EncoderSpec& spec() const = 0;
    // source_id identifies the image for backends that key features externally.
    virtual LayerStack encode(const Image& image, const std::string& source_id) = 0;
    // Frozen-parameter fingerprints for the freeze audit; stateless backends
    // contribute nothing.
    virtual void hash_parameters(std::map<std::string, uint64_t>& out,
                                 const std::string& prefix) const {
        (void)out;
        (void)prefix;
    }
};

LayerStack encode_layers(const Image& image, VisionBackend& backend,
                         const std::string& source_id = "");

// Deterministic stand-in for a ViT: seeded fixed weights, patch statistics in,
// tanh layers with light cross-token mixing out.
class SurrogateVisionEncoder : public VisionBackend {
public:
    SurrogateVisionEncoder(const EncoderSpec& spec, uint64_t seed);
    const EncoderSpec& spec() const override { return spec_; }
    LayerStack encode(const Image& image, const std::string& source_id) override;
    void hash_parameters(std::map<std::string, uint64_t>& out,
                         const std::string& prefix) const override;

private:
    EncoderSpec spec_;
    std::vector<Mat> layer_w_;
    std::vector<Vec> layer_b_;
    Mat embed_;
};

// Serves precomputed LayerStacks from <dir>/<source_id>.tensors archives with
// tensors named z0..z{k-1}.
class FileVisionBackend : public VisionBackend {
public:
    FileVisionBackend(const EncoderSpec& spec, std::string dir);
    const EncoderSpec& spec() const override { return spec_; }
    LayerStack encode(const Image& image, const std::string& source_id) override;

private:
    EncoderSpec spec_;
    std::string dir_;
};

}  // namespace aniadapter
