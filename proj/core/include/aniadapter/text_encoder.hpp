#pragma once

#include <string>

#include "aniadapter/linalg.hpp"

namespace aniadapter {

class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual int dim() const = 0;
    // Token-embedding matrix, one row per token. Never empty: an empty prompt
    // maps to the single null-token row used for unconditional passes.
    virtual Mat encode(const std::string& prompt) = 0;
};

// Stateless hash-seeded embeddings: each comma-separated tag deterministically
// maps to one row, prefixed by a null token row.
class SurrogateTextEncoder : public TextBackend {
public:
    SurrogateTextEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {}
    int dim() const override { return dim_; }
    Mat encode(const std::string& prompt) override;

private:
    Vec token_embedding(const std::string& token) const;
    int dim_;
    uint64_t seed_;
};

}  // namespace aniadapter
