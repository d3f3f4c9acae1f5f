#include "aniadapter/text_encoder.hpp"

#include "aniadapter/rng.hpp"

namespace aniadapter {

static uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Vec SurrogateTextEncoder::token_embedding(const std::string& token) const {
    Rng rng(seed_ ^ fnv1a(token));
    Vec v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = rng.normal() / std::sqrt(double(dim_));
    return v;
}

Mat SurrogateTextEncoder::encode(const std::string& prompt) {
    std::vector<std::string> tokens;
    size_t start = 0;
    while (start <= prompt.size()) {
        size_t comma = prompt.find(',', start);
        std::string piece = comma == std::string::npos ? prompt.substr(start)
                                                       : prompt.substr(start, comma - start);
        while (!piece.empty() && piece.front() == ' ') piece.erase(piece.begin());
        while (!piece.empty() && piece.back() == ' ') piece.pop_back();
        if (!piece.empty()) tokens.push_back(piece);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    Mat out(1 + tokens.size(), dim_);
    out.row(0) = token_embedding("\x01null").transpose();
    for (size_t i = 0; i < tokens.size(); ++i)
        out.row(Eigen::Index(i + 1)) = token_embedding(tokens[i]).transpose();
    return out;
}

}  // namespace aniadapter
