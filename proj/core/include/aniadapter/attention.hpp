#pragma once

#include <functional>
#include <string>
#include <vector>

#include "aniadapter/encoder.hpp"
#include "aniadapter/linalg.hpp"

namespace aniadapter {

enum class MaskMode { train_bias, infer_multiplicative };
enum class InjectScope { full_blocks, up_blocks };

const char* mask_mode_name(MaskMode m);
MaskMode mask_mode_from_name(const std::string& name);
const char* inject_scope_name(InjectScope s);
InjectScope inject_scope_from_name(const std::string& name);

struct InjectionConfig {
    double gamma = 1.0;             // global image-branch scale
    double neg_bias = 1e4;          // background logit bias magnitude (train mode)
    MaskMode mode = MaskMode::train_bias;
    InjectScope scope = InjectScope::full_blocks;
    bool renormalize = false;       // infer mode: renormalize masked rows (off by default)
    bool class_token_foreground = true;
    std::function<void(const std::string&)> warn;  // degenerate-mask notices; default stderr
};

// One cross-attention site's inputs. Wk/Wv are the site's learned image
// projections (D' x d); K and V belong to the text branch.
struct AttentionIO {
    Mat Q;        // M x d
    Mat K, V;     // N_text x d
    Mat Wk, Wv;   // D' x d
};

// softmax(Q K^T / sqrt(d)) V
Mat scaled_attention(const Mat& Q, const Mat& K, const Mat& V);

struct MaskedReference {
    ReferenceTokens ref;
    TokenMask mask;
    double gamma = 1.0;  // per-reference scale
};

// Z = Attn(Q,K,V) + gamma * Attn(Q, I Wk, I Wv)
Mat decoupled_attention(const AttentionIO& io, const ReferenceTokens& ref,
                        const InjectionConfig& cfg);

struct BranchCache {
    Mat Q, K, V;
    Mat P;        // post-softmax weights (post-mask in infer mode)
    Mat P_soft;   // softmax output before multiplicative masking
    Vec col_mask; // size 0 when unmasked
};

struct InjectionCache {
    BranchCache base;
    struct Ref {
        BranchCache branch;
        Mat I, Kp, Vp;
        double gamma = 1.0;
    };
    std::vector<Ref> refs;
};

// Z = Attn(Q,K,V) + sum_i gamma_i * MaskedAttn_i. train_bias adds -neg_bias
// to background-token logits before softmax; infer_multiplicative multiplies
// post-softmax weights by the mask with no renormalization.
Mat masked_multi_reference_attention(const AttentionIO& io,
                                     const std::vector<MaskedReference>& refs,
                                     const InjectionConfig& cfg,
                                     InjectionCache* cache = nullptr);

struct AttentionGrads {
    Mat dQ, dK, dV;
    Mat dWk, dWv;              // accumulated over references
    std::vector<Mat> dI;       // per reference
};

AttentionGrads masked_attention_backward(const InjectionCache& cache, const AttentionIO& io,
                                         const InjectionConfig& cfg, const Mat& dZ);

// Patch j is foreground iff its foreground-pixel fraction >= threshold; the
// class-token entry follows cfg (foreground by default).
TokenMask pixel_mask_to_token_mask(const PixelMask& mask, const EncoderSpec& spec,
                                   double threshold = 0.5, bool class_token_foreground = true);

}  // namespace aniadapter
