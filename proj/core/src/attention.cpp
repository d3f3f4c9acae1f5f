#include "aniadapter/attention.hpp"

#include <cmath>
#include <iostream>

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* mask_mode_name(MaskMode m) {
    return m == MaskMode::train_bias ? "train_bias" : "infer_multiplicative";
}

MaskMode mask_mode_from_name(const std::string& name) {
    if (name == "train_bias") return MaskMode::train_bias;
    if (name == "infer_multiplicative") return MaskMode::infer_multiplicative;
    throw DataError("unknown mask mode: " + name);
}

const char* inject_scope_name(InjectScope s) {
    return s == InjectScope::full_blocks ? "full_blocks" : "up_blocks";
}

InjectScope inject_scope_from_name(const std::string& name) {
    if (name == "full_blocks" || name == "full") return InjectScope::full_blocks;
    if (name == "up_blocks" || name == "up") return InjectScope::up_blocks;
    throw DataError("unknown injection scope: " + name);
}

Mat scaled_attention(const Mat& Q, const Mat& K, const Mat& V) {
    if (Q.cols() != K.cols()) throw DataError("attention: Q/K width mismatch");
    if (K.rows() != V.rows()) throw DataError("attention: K/V row mismatch");
    Mat logits = Q * K.transpose() / std::sqrt(double(Q.cols()));
    return softmax_rows(logits) * V;
}

static void emit_warning(const InjectionConfig& cfg, const std::string& msg) {
    if (cfg.warn)
        cfg.warn(msg);
    else
        std::cerr << "warning: " << msg << '\n';
}

static Mat branch_forward(const Mat& Q, const Mat& K, const Mat& V, const Vec* mask,
                          const InjectionConfig& cfg, BranchCache* cache) {
    if (Q.cols() != K.cols()) throw DataError("attention: Q/K width mismatch");
    if (K.rows() != V.rows()) throw DataError("attention: K/V row mismatch");
    if (mask && mask->size() != K.rows())
        throw DataError("token mask length does not match reference token count");
    Mat logits = Q * K.transpose() / std::sqrt(double(Q.cols()));
    Mat p_soft, p;
    if (!mask) {
        p_soft = softmax_rows(logits);
        p = p_soft;
    } else if (cfg.mode == MaskMode::train_bias) {
        for (Eigen::Index j = 0; j < mask->size(); ++j)
            if ((*mask)[j] == 0.0) logits.col(j).array() -= cfg.neg_bias;
        p_soft = softmax_rows(logits);
        p = p_soft;
    } else {
        p_soft = softmax_rows(logits);
        p = p_soft;
        for (Eigen::Index j = 0; j < mask->size(); ++j) p.col(j) *= (*mask)[j];
        if (cfg.renormalize) {
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                double s = p.row(r).sum();
                if (s > 0) p.row(r) /= s;
            }
        }
    }
    if (cache) {
        cache->Q = Q;
        cache->K = K;
        cache->V = V;
        cache->P = p;
        cache->P_soft = p_soft;
        cache->col_mask = mask ? *mask : Vec();
    }
    return p * V;
}

Mat decoupled_attention(const AttentionIO& io, const ReferenceTokens& ref,
                        const InjectionConfig& cfg) {
    std::vector<MaskedReference> refs(1);
    refs[0].ref = ref;
    refs[0].mask.m = Vec::Ones(ref.tokens.rows());
    refs[0].gamma = 1.0;
    InjectionConfig c = cfg;
    return masked_multi_reference_attention(io, refs, c);
}

Mat masked_multi_reference_attention(const AttentionIO& io,
                                     const std::vector<MaskedReference>& refs,
                                     const InjectionConfig& cfg, InjectionCache* cache) {
    if (cfg.gamma < 0) throw DataError("gamma must be non-negative");
    if (cfg.neg_bias <= 0) throw DataError("neg_bias must be positive");
    BranchCache* base_cache = cache ? &cache->base : nullptr;
    BranchCache local;
    Mat z = branch_forward(io.Q, io.K, io.V, nullptr, cfg, cache ? base_cache : &local);
    if (cache) cache->refs.clear();
    for (const MaskedReference& mr : refs) {
        if (mr.gamma < 0) throw DataError("per-reference gamma must be non-negative");
        const Mat& I = mr.ref.tokens;
        if (I.cols() != io.Wk.rows())
            throw DataError("reference token width does not match projection");
        if (mr.mask.m.size() != I.rows())
            throw DataError("token mask length does not match reference token count");
        for (Eigen::Index j = 0; j < mr.mask.m.size(); ++j)
            if (mr.mask.m[j] != 0.0 && mr.mask.m[j] != 1.0)
                throw DataError("token mask entries must be 0 or 1");
        if (cfg.mode == MaskMode::train_bias && mr.mask.m.maxCoeff() == 0.0)
            emit_warning(cfg, "all-zero token mask in train_bias mode: bias shift cancels and "
                              "the reference attends unmasked");
        Mat Kp = I * io.Wk;
        Mat Vp = I * io.Wv;
        InjectionCache::Ref rc;
        Mat contrib = branch_forward(io.Q, Kp, Vp, &mr.mask.m, cfg, cache ? &rc.branch : nullptr);
        double scale = cfg.gamma * mr.gamma;
        z += scale * contrib;
        if (cache) {
            rc.I = I;
            rc.Kp = Kp;
            rc.Vp = Vp;
            rc.gamma = scale;
            cache->refs.push_back(std::move(rc));
        }
    }
    return z;
}

// dZ -> gradients through softmax(QK^T/sqrt(d)) V for one branch. Returns dQ
// and accumulates dK, dV into the out-params.
static Mat branch_backward(const BranchCache& bc, const InjectionConfig& cfg, const Mat& dO,
                           Mat& dK, Mat& dV) {
    double inv_sqrt_d = 1.0 / std::sqrt(double(bc.Q.cols()));
    Mat dP = dO * bc.V.transpose();
    dV = bc.P.transpose() * dO;
    if (bc.col_mask.size() > 0 && cfg.mode == MaskMode::infer_multiplicative) {
        for (Eigen::Index j = 0; j < bc.col_mask.size(); ++j) dP.col(j) *= bc.col_mask[j];
    }
    // softmax backward on P_soft
    Mat dA(dP.rows(), dP.cols());
    for (Eigen::Index r = 0; r < dP.rows(); ++r) {
        double rd = (dP.row(r).array() * bc.P_soft.row(r).array()).sum();
        dA.row(r) = bc.P_soft.row(r).array() * (dP.row(r).array() - rd);
    }
    Mat dQ = dA * bc.K * inv_sqrt_d;
    dK = dA.transpose() * bc.Q * inv_sqrt_d;
    return dQ;
}

AttentionGrads masked_attention_backward(const InjectionCache& cache, const AttentionIO& io,
                                         const InjectionConfig& cfg, const Mat& dZ) {
    AttentionGrads g;
    g.dWk = Mat::Zero(io.Wk.rows(), io.Wk.cols());
    g.dWv = Mat::Zero(io.Wv.rows(), io.Wv.cols());
    g.dQ = branch_backward(cache.base, cfg, dZ, g.dK, g.dV);
    for (const auto& rc : cache.refs) {
        Mat dKp, dVp;
        Mat dO = rc.gamma * dZ;
        g.dQ += branch_backward(rc.branch, cfg, dO, dKp, dVp);
        g.dWk += rc.I.transpose() * dKp;
        g.dWv += rc.I.transpose() * dVp;
        g.dI.push_back(dKp * io.Wk.transpose() + dVp * io.Wv.transpose());
    }
    return g;
}

TokenMask pixel_mask_to_token_mask(const PixelMask& mask, const EncoderSpec& spec,
                                   double threshold, bool class_token_foreground) {
    if (mask.height != spec.image_h || mask.width != spec.image_w)
        throw DataError("pixel mask dimensions do not match encoder input size");
    int n = patch_token_count(spec);
    int gh = spec.image_h / spec.patch;
    int gw = spec.image_w / spec.patch;
    TokenMask tm;
    tm.m = Vec::Zero(n);
    tm.m[0] = class_token_foreground ? 1.0 : 0.0;
    double patch_pixels = double(spec.patch) * spec.patch;
    for (int py = 0; py < gh; ++py) {
        for (int px = 0; px < gw; ++px) {
            int fg = 0;
            for (int dy = 0; dy < spec.patch; ++dy)
                for (int dx = 0; dx < spec.patch; ++dx)
                    fg += mask.at(py * spec.patch + dy, px * spec.patch + dx);
            tm.m[1 + py * gw + px] = (double(fg) / patch_pixels >= threshold) ? 1.0 : 0.0;
        }
    }
    return tm;
}

}  // namespace aniadapter
