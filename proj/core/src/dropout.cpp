#include "aniadapter/dropout.hpp"

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* dropout_mode_name(DropoutMode m) {
    return m == DropoutMode::reinterpreted ? "reinterpreted" : "literal";
}

DropoutMode dropout_mode_from_name(const std::string& name) {
    if (name == "reinterpreted") return DropoutMode::reinterpreted;
    if (name == "literal") return DropoutMode::literal;
    throw DataError("unknown dropout mode: " + name);
}

DropoutDecision sample_dropout(double c, DropoutMode mode) {
    double hi = mode == DropoutMode::literal ? 0.25 : 1.0;
    if (c < 0.0 || c >= hi)
        throw DataError("dropout draw " + std::to_string(c) + " outside [0, " +
                        std::to_string(hi) + ")");
    DropoutDecision d;
    d.c = c;
    if (c < 0.15) {
        d.drop_image = true;
    } else if (c < 0.2) {
        d.drop_text = true;
    } else if (c < 0.25) {
        d.drop_image = true;
        d.drop_text = true;
    }
    return d;
}

DropoutDecision sample_dropout(Rng& rng, DropoutMode mode) {
    double hi = mode == DropoutMode::literal ? 0.25 : 1.0;
    return sample_dropout(rng.uniform(0.0, hi), mode);
}

}  // namespace aniadapter
