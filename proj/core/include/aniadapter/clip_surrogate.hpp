#pragma once

#include <string>

#include "aniadapter/image.hpp"
#include "aniadapter/linalg.hpp"

namespace aniadapter {

// Joint image/text embedding contract backing CLIP-I, CLIP-T and FID features.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual int dim() const = 0;
    virtual Vec embed_image(const Image& image) = 0;
    virtual Vec embed_text(const std::string& prompt) = 0;
};

// Perceptual distance contract (LPIPS stand-in in tests).
class DistanceBackend {
public:
    virtual ~DistanceBackend() = default;
    virtual double distance(const Image& a, const Image& b) = 0;
};

// Deterministic stand-in: images pass through a fixed seeded projection of
// coarse patch statistics; text passes through hashed token embeddings.
class SurrogateEmbedder : public EmbeddingBackend {
public:
    SurrogateEmbedder(int dim, uint64_t seed, int grid = 8);
    int dim() const override { return dim_; }
    Vec embed_image(const Image& image) override;
    Vec embed_text(const std::string& prompt) override;

private:
    int dim_;
    int grid_;
    uint64_t seed_;
    Mat image_proj_;  // (grid*grid) x dim
};

// Multi-scale mean-squared feature difference; zero iff images identical at
// the compared scales.
class SurrogateLpips : public DistanceBackend {
public:
    explicit SurrogateLpips(std::vector<int> scales = {4, 8, 16});
    double distance(const Image& a, const Image& b) override;

private:
    std::vector<int> scales_;
};

double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace aniadapter
