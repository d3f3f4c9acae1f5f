#include "aniadapter/encoder.hpp"

#include <cmath>
#include <filesystem>

#include "aniadapter/checkpoint.hpp"
#include "aniadapter/error.hpp"

namespace aniadapter {

static constexpr double kLnEps = 1e-5;

int patch_token_count(const EncoderSpec& spec) {
    if (spec.patch <= 0) throw DataError("patch size must be positive");
    if (spec.image_h % spec.patch != 0 || spec.image_w % spec.patch != 0)
        throw DataError("image size " + std::to_string(spec.image_h) + "x" +
                        std::to_string(spec.image_w) + " not divisible by patch " +
                        std::to_string(spec.patch));
    return 1 + (spec.image_h / spec.patch) * (spec.image_w / spec.patch);
}

AggregatorParams AggregatorParams::init(const EncoderSpec& spec, Rng& rng) {
    if (spec.k < 1 || spec.k > spec.layers)
        throw DataError("aggregator k must satisfy 1 <= k <= L");
    AggregatorParams p;
    p.alphas = Vec::Constant(spec.k, 1.0 / spec.k);
    double scale = std::sqrt(double(spec.target_dim) / double(spec.hidden_dim));
    for (int i = 0; i < spec.k; ++i) {
        Rng layer_rng = rng.fork("aggregator proj " + std::to_string(i));
        p.proj.push_back(scale * random_orthonormal(layer_rng, spec.hidden_dim, spec.target_dim));
    }
    p.ln_gamma = Vec::Ones(spec.target_dim);
    p.ln_beta = Vec::Zero(spec.target_dim);
    return p;
}

Mat aggregate(const LayerStack& stack, const AggregatorParams& params, AggregateCache* cache) {
    size_t k = stack.z.size();
    if (k == 0) throw DataError("empty layer stack");
    if (size_t(params.alphas.size()) != k || params.proj.size() != k)
        throw DataError("aggregator parameter count does not match stack depth");
    Eigen::Index n = stack.z[0].rows();
    Eigen::Index d = stack.z[0].cols();
    for (const Mat& z : stack.z) {
        if (z.rows() != n || z.cols() != d) throw DataError("layer stack shapes differ");
        if (!z.allFinite()) throw DataError("layer stack contains non-finite values");
    }
    if (params.proj[0].rows() != d) throw DataError("projection rows do not match hidden dim");

    Mat sum = Mat::Zero(n, params.proj[0].cols());
    for (size_t i = 0; i < k; ++i) sum += params.alphas[Eigen::Index(i)] * (stack.z[i] * params.proj[i]);

    Mat out;
    Mat normalized;
    Vec inv_std = Vec::Zero(n);
    if (params.ln_bypass) {
        out = sum;
    } else {
        out.resize(sum.rows(), sum.cols());
        normalized.resize(sum.rows(), sum.cols());
        for (Eigen::Index r = 0; r < sum.rows(); ++r) {
            double mu = sum.row(r).mean();
            double var = (sum.row(r).array() - mu).square().mean();
            double is = 1.0 / std::sqrt(var + kLnEps);
            inv_std[r] = is;
            normalized.row(r) = (sum.row(r).array() - mu) * is;
            out.row(r) = normalized.row(r).array() * params.ln_gamma.transpose().array() +
                         params.ln_beta.transpose().array();
        }
    }
    if (cache) {
        cache->stack = stack;
        cache->pre_norm = sum;
        cache->normalized = normalized;
        cache->inv_std = inv_std;
    }
    return out;
}

AggregateGrads aggregate_backward(const AggregateCache& cache, const AggregatorParams& params,
                                  const Mat& dout) {
    size_t k = cache.stack.z.size();
    AggregateGrads g;
    g.dalphas = Vec::Zero(Eigen::Index(k));
    g.dln_gamma = Vec::Zero(params.ln_gamma.size());
    g.dln_beta = Vec::Zero(params.ln_beta.size());

    Mat dsum;
    if (params.ln_bypass) {
        dsum = dout;
    } else {
        dsum.resize(dout.rows(), dout.cols());
        for (Eigen::Index r = 0; r < dout.rows(); ++r) {
            Vec dy = dout.row(r).transpose();
            Vec xhat = cache.normalized.row(r).transpose();
            g.dln_gamma += dy.cwiseProduct(xhat);
            g.dln_beta += dy;
            Vec dxhat = dy.cwiseProduct(params.ln_gamma);
            double m1 = dxhat.mean();
            double m2 = dxhat.cwiseProduct(xhat).mean();
            dsum.row(r) =
                (cache.inv_std[r] * (dxhat.array() - m1 - xhat.array() * m2)).transpose();
        }
    }
    for (size_t i = 0; i < k; ++i) {
        Mat zw = cache.stack.z[i] * params.proj[i];
        g.dalphas[Eigen::Index(i)] = (dsum.array() * zw.array()).sum();
        g.dproj.push_back(params.alphas[Eigen::Index(i)] * cache.stack.z[i].transpose() * dsum);
    }
    return g;
}

LayerStack encode_layers(const Image& image, VisionBackend& backend,
                         const std::string& source_id) {
    try {
        return backend.encode(image, source_id);
    } catch (const BackendError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(std::string("vision backend failed: ") + e.what());
    }
}

SurrogateVisionEncoder::SurrogateVisionEncoder(const EncoderSpec& spec, uint64_t seed)
    : spec_(spec) {
    patch_token_count(spec_);  // validate divisibility up front
    Rng rng(seed);
    Rng embed_rng = rng.fork("patch embed");
    embed_ = random_matrix(embed_rng, 5, spec_.hidden_dim, 1.0);
    for (int l = 0; l < spec_.layers; ++l) {
        Rng layer_rng = rng.fork("layer " + std::to_string(l));
        layer_w_.push_back(random_matrix(layer_rng, spec_.hidden_dim, spec_.hidden_dim,
                                         1.0 / std::sqrt(double(spec_.hidden_dim))));
        layer_b_.push_back(0.1 * random_matrix(layer_rng, spec_.hidden_dim, 1, 1.0).col(0));
    }
}

LayerStack SurrogateVisionEncoder::encode(const Image& image, const std::string&) {
    Image img = image;
    if (img.height != spec_.image_h || img.width != spec_.image_w)
        img = resize_nearest(img, spec_.image_h, spec_.image_w);
    int gh = spec_.image_h / spec_.patch;
    int gw = spec_.image_w / spec_.patch;
    int n = 1 + gh * gw;

    // Per-patch raw features: mean, stddev, x, y, mean*x - then embed to D.
    Mat raw = Mat::Zero(n, 5);
    double global_sum = 0, global_sq = 0;
    for (int py = 0; py < gh; ++py) {
        for (int px = 0; px < gw; ++px) {
            double s = 0, sq = 0;
            for (int dy = 0; dy < spec_.patch; ++dy)
                for (int dx = 0; dx < spec_.patch; ++dx) {
                    double v = img.at(py * spec_.patch + dy, px * spec_.patch + dx);
                    s += v;
                    sq += v * v;
                }
            double cnt = double(spec_.patch) * spec_.patch;
            double mean = s / cnt;
            double var = std::max(0.0, sq / cnt - mean * mean);
            double cx = (px + 0.5) / gw;
            double cy = (py + 0.5) / gh;
            int row = 1 + py * gw + px;
            raw.row(row) << mean, std::sqrt(var), cx, cy, mean * cx;
            global_sum += s;
            global_sq += sq;
        }
    }
    double npix = double(img.height) * img.width;
    double gmean = global_sum / npix;
    double gvar = std::max(0.0, global_sq / npix - gmean * gmean);
    raw.row(0) << gmean, std::sqrt(gvar), 0.5, 0.5, gmean * 0.5;

    Mat z = raw * embed_;
    std::vector<Mat> all;
    for (int l = 0; l < spec_.layers; ++l) {
        Mat mixed = z * layer_w_[l];
        Vec colmean = mixed.colwise().mean().transpose();
        mixed.rowwise() += (0.1 * colmean + layer_b_[l]).transpose();
        z = mixed.array().tanh();
        all.push_back(z);
    }
    LayerStack stack;
    for (int i = 0; i < spec_.k; ++i) stack.z.push_back(all[size_t(spec_.layers - 1 - i)]);
    return stack;
}

void SurrogateVisionEncoder::hash_parameters(std::map<std::string, uint64_t>& out,
                                             const std::string& prefix) const {
    out[prefix + ".embed"] = hash_matrix(embed_);
    for (size_t l = 0; l < layer_w_.size(); ++l) {
        out[prefix + ".layer" + std::to_string(l) + ".w"] = hash_matrix(layer_w_[l]);
        out[prefix + ".layer" + std::to_string(l) + ".b"] = hash_matrix(layer_b_[l]);
    }
}

FileVisionBackend::FileVisionBackend(const EncoderSpec& spec, std::string dir)
    : spec_(spec), dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw BackendError("feature directory not found: " + dir_);
}

LayerStack FileVisionBackend::encode(const Image&, const std::string& source_id) {
    if (source_id.empty()) throw BackendError("file vision backend needs a source id");
    std::string path = dir_ + "/" + source_id + ".tensors";
    if (!std::filesystem::exists(path))
        throw BackendError("no stored features for '" + source_id + "' at " + path);
    TensorArchive ar = TensorArchive::load(path);
    LayerStack stack;
    for (int i = 0; i < spec_.k; ++i) {
        std::string name = "z" + std::to_string(i);
        if (!ar.has(name))
            throw BackendError("stored features for '" + source_id + "' missing tensor " + name);
        stack.z.push_back(ar.get(name));
    }
    int n = patch_token_count(spec_);
    for (const Mat& z : stack.z)
        if (z.rows() != n || z.cols() != spec_.hidden_dim)
            throw BackendError("stored feature shape mismatch for '" + source_id + "'");
    return stack;
}

}  // namespace aniadapter
