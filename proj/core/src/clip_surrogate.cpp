#include "aniadapter/clip_surrogate.hpp"

#include <cmath>

#include "aniadapter/error.hpp"
#include "aniadapter/rng.hpp"
#include "aniadapter/text_encoder.hpp"

namespace aniadapter {

SurrogateEmbedder::SurrogateEmbedder(int dim, uint64_t seed, int grid)
    : dim_(dim), grid_(grid), seed_(seed) {
    Rng rng(seed ^ 0x11a9e5u);
    image_proj_ = random_matrix(rng, grid * grid, dim, 1.0 / std::sqrt(double(grid * grid)));
}

Vec SurrogateEmbedder::embed_image(const Image& image) {
    // Mean intensity per cell of a grid x grid partition, then a fixed
    // projection. Sensitive to any foreground change, smooth in pixel values.
    Vec cells = Vec::Zero(grid_ * grid_);
    for (int gy = 0; gy < grid_; ++gy) {
        int r0 = gy * image.height / grid_;
        int r1 = std::max(r0 + 1, (gy + 1) * image.height / grid_);
        r1 = std::min(r1, image.height);
        for (int gx = 0; gx < grid_; ++gx) {
            int c0 = gx * image.width / grid_;
            int c1 = std::max(c0 + 1, (gx + 1) * image.width / grid_);
            c1 = std::min(c1, image.width);
            double s = 0;
            int n = 0;
            for (int r = r0; r < r1; ++r)
                for (int c = c0; c < c1; ++c) {
                    s += image.at(r, c);
                    ++n;
                }
            cells[gy * grid_ + gx] = n ? s / n : 0.0;
        }
    }
    return image_proj_.transpose() * cells;
}

Vec SurrogateEmbedder::embed_text(const std::string& prompt) {
    SurrogateTextEncoder enc(dim_, seed_ ^ 0x7e47u);
    Mat tokens = enc.encode(prompt);
    return tokens.colwise().mean().transpose();
}

SurrogateLpips::SurrogateLpips(std::vector<int> scales) : scales_(std::move(scales)) {
    if (scales_.empty()) throw DataError("distance backend needs at least one scale");
}

double SurrogateLpips::distance(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width)
        throw DataError("distance: image dimensions differ");
    double total = 0.0;
    for (int s : scales_) {
        Image da = resize_nearest(a, s, s);
        Image db = resize_nearest(b, s, s);
        double acc = 0.0;
        for (size_t i = 0; i < da.pix.size(); ++i) {
            double d = da.pix[i] - db.pix[i];
            acc += d * d;
        }
        total += acc / double(da.pix.size());
    }
    return total / double(scales_.size());
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DataError("cosine: vector sizes differ");
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace aniadapter
