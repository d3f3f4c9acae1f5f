#pragma once

#include <string>

#include "aniadapter/rng.hpp"

namespace aniadapter {

enum class DropoutMode { reinterpreted, literal };

const char* dropout_mode_name(DropoutMode m);
DropoutMode dropout_mode_from_name(const std::string& name);

struct DropoutDecision {
    double c = 0.0;
    bool drop_image = false;
    bool drop_text = false;
};

// Threshold table: c<0.15 drops the image embedding, 0.15<=c<0.2 drops the
// text condition, 0.2<=c<0.25 drops both. reinterpreted mode draws c from
// [0,1) so 75% of steps keep both conditions; literal mode draws from
// [0,0.25) so something is dropped every step. The pose condition is never
// dropped.
DropoutDecision sample_dropout(double c, DropoutMode mode);
DropoutDecision sample_dropout(Rng& rng, DropoutMode mode);

}  // namespace aniadapter
