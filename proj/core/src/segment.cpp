#include "aniadapter/segment.hpp"

#include <filesystem>

#include "aniadapter/error.hpp"

namespace aniadapter {

static void check_prompt(const SegmenterRequest& request) {
    if (request.prompt.empty()) throw DataError("segmenter request needs a non-empty prompt");
}

StoredMaskOracle::StoredMaskOracle(std::string dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw BackendError("mask directory not found: " + dir_);
}

PixelMask StoredMaskOracle::segment(const SegmenterRequest& request,
                                    const std::string& source_id) {
    check_prompt(request);
    if (source_id.empty()) throw BackendError("stored mask oracle needs a source id");
    std::string path = dir_ + "/" + source_id + ".mask.png";
    if (!std::filesystem::exists(path))
        throw BackendError("no stored mask for '" + source_id + "' at " + path);
    return read_mask_png(path);
}

PixelMask ThresholdSegmenter::segment(const SegmenterRequest& request, const std::string&) {
    check_prompt(request);
    const Image& img = request.image;
    PixelMask mask(img.height, img.width, 0);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            mask.at(r, c) = img.at(r, c) > threshold_ ? 1 : 0;
    return mask;
}

}  // namespace aniadapter
