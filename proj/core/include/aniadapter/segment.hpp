#pragma once

#include <string>

#include "aniadapter/image.hpp"

namespace aniadapter {

struct SegmenterRequest {
    Image image;
    std::string prompt;  // subject description, must be non-empty
};

class SegmentBackend {
public:
    virtual ~SegmentBackend() = default;
    virtual PixelMask segment(const SegmenterRequest& request, const std::string& source_id) = 0;
};

// Serves masks stored as <dir>/<source_id>.mask.png (1-bit PNG).
class StoredMaskOracle : public SegmentBackend {
public:
    explicit StoredMaskOracle(std::string dir);
    PixelMask segment(const SegmenterRequest& request, const std::string& source_id) override;

private:
    std::string dir_;
};

// Foreground = pixel intensity strictly above the threshold.
class ThresholdSegmenter : public SegmentBackend {
public:
    explicit ThresholdSegmenter(double threshold = 0.5) : threshold_(threshold) {}
    PixelMask segment(const SegmenterRequest& request, const std::string& source_id) override;

private:
    double threshold_;
};

}  // namespace aniadapter
