#include "aniadapter/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "aniadapter/error.hpp"

namespace aniadapter {

namespace {

bool mask_blank(const PixelMask& mask) {
    for (uint8_t b : mask.bits)
        if (b) return false;
    return true;
}

// Symmetric PSD square root via eigendecomposition, negative rounding clamped.
Mat spd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double masked_clip_i(const Image& gen, const Image& ref, const PixelMask& gen_mask,
                     const PixelMask& ref_mask, EmbeddingBackend& encoder,
                     bool* computed_on_blank) {
    Image gen_fg = white_composite(gen, gen_mask);
    Image ref_fg = white_composite(ref, ref_mask);
    if (computed_on_blank) *computed_on_blank = mask_blank(gen_mask) || mask_blank(ref_mask);
    return cosine_similarity(encoder.embed_image(gen_fg), encoder.embed_image(ref_fg));
}

double diversity(const std::vector<Image>& samples, DistanceBackend& lpips) {
    if (samples.size() != 4)
        throw DataError("diversity expects exactly 4 samples, got " +
                        std::to_string(samples.size()));
    double sum = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < samples.size(); ++i)
        for (size_t j = i + 1; j < samples.size(); ++j) {
            sum += lpips.distance(samples[i], samples[j]);
            ++pairs;
        }
    return sum / double(pairs);
}

double psnr(const Image& gen, const Image& ref, const PixelMask& mask) {
    if (gen.height != ref.height || gen.width != ref.width)
        throw DataError("psnr: image dimension mismatch");
    if (gen.height != mask.height || gen.width != mask.width)
        throw DataError("psnr: mask dimension mismatch");
    double se = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < mask.bits.size(); ++i) {
        if (!mask.bits[i]) continue;
        double d = gen.pix[i] - ref.pix[i];
        se += d * d;
        ++n;
    }
    if (n == 0) throw DataError("psnr: mask has no foreground pixels");
    double mse = se / double(n);
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, -10.0 * std::log10(mse));
}

double frechet_distance(const std::vector<Vec>& feats_a, const std::vector<Vec>& feats_b) {
    if (feats_a.size() < 2 || feats_b.size() < 2)
        throw DataError("frechet_distance needs at least 2 features per set");
    const Eigen::Index d = feats_a[0].size();
    auto fit = [d](const std::vector<Vec>& feats) {
        Mat x(Eigen::Index(feats.size()), d);
        for (size_t i = 0; i < feats.size(); ++i) {
            if (feats[i].size() != d) throw DataError("frechet_distance: ragged feature set");
            x.row(Eigen::Index(i)) = feats[i].transpose();
        }
        Vec mu = x.colwise().mean();
        Mat centered = x.rowwise() - mu.transpose();
        Mat sigma = centered.transpose() * centered / double(feats.size() - 1);
        sigma.diagonal().array() += 1e-6;
        return std::pair<Vec, Mat>(mu, sigma);
    };
    auto [mu_a, sigma_a] = fit(feats_a);
    auto [mu_b, sigma_b] = fit(feats_b);

    // Tr((Sa Sb)^1/2) computed through the symmetric form Sa^1/2 Sb Sa^1/2.
    Mat root_a = spd_sqrt(sigma_a);
    Mat inner = spd_sqrt(root_a * sigma_b * root_a);
    double dist = (mu_a - mu_b).squaredNorm() +
                  (sigma_a + sigma_b).trace() - 2.0 * inner.trace();
    return std::max(0.0, dist);
}

double fid(const std::vector<Image>& set_a, const std::vector<PixelMask>& masks_a,
           const std::vector<Image>& set_b, const std::vector<PixelMask>& masks_b,
           EmbeddingBackend& encoder) {
    if (set_a.size() != masks_a.size() || set_b.size() != masks_b.size())
        throw DataError("fid: image/mask count mismatch");
    auto embed = [&](const std::vector<Image>& imgs, const std::vector<PixelMask>& masks) {
        std::vector<Vec> feats;
        feats.reserve(imgs.size());
        for (size_t i = 0; i < imgs.size(); ++i)
            feats.push_back(encoder.embed_image(white_composite(imgs[i], masks[i])));
        return feats;
    };
    return frechet_distance(embed(set_a, masks_a), embed(set_b, masks_b));
}

double clip_t(const Image& gen, const std::string& prompt, EmbeddingBackend& encoder) {
    if (prompt.empty()) throw DataError("clip_t: empty prompt");
    return cosine_similarity(encoder.embed_image(gen), encoder.embed_text(prompt));
}

AkdMkr akd_mkr(const PoseSkeleton& gen, const PoseSkeleton& cond) {
    AkdMkr out;
    int cond_detected = cond.detected_count();
    if (cond_detected == 0) return out;
    out.valid = true;
    double dist = 0.0;
    int both = 0, missing = 0;
    for (int j = 0; j < kJointCount; ++j) {
        if (!cond.joints[j].detected) continue;
        if (!gen.joints[j].detected) {
            ++missing;
            continue;
        }
        double dx = gen.joints[j].x - cond.joints[j].x;
        double dy = gen.joints[j].y - cond.joints[j].y;
        dist += std::sqrt(dx * dx + dy * dy);
        ++both;
    }
    out.mkr = double(missing) / double(cond_detected);
    if (both > 0) {
        out.akd = dist / double(both);
        out.akd_valid = true;
    }
    return out;
}

double failure_rate(const std::vector<PoseSkeleton>& gen_skeletons, int min_joints) {
    if (gen_skeletons.empty()) return 0.0;
    int failures = 0;
    for (const PoseSkeleton& s : gen_skeletons)
        if (s.detected_count() < min_joints) ++failures;
    return double(failures) / double(gen_skeletons.size());
}

}  // namespace aniadapter
