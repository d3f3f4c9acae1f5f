#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aniadapter/image.hpp"
#include "aniadapter/manifest.hpp"
#include "aniadapter/pose.hpp"
#include "aniadapter/prompts.hpp"
#include "aniadapter/taxonomy.hpp"

namespace aniadapter {

struct DatasetBuildOptions {
    std::string metadata_path;
    std::string taxonomy_path;  // empty -> builtin table
    std::string out_dir;
    uint64_t seed = 0;
    std::vector<EditTask> tasks;  // empty -> all five
    // Desk-scale asset synthesis: a seeded figure-on-disk image plus matching
    // mask and skeleton per accepted entry. Off -> prompt-only manifest.
    bool synthesize = true;
    int image_size = 28;
    std::function<void(const std::string&)> log;
};

struct DatasetBuildReport {
    int total = 0;
    int accepted = 0;
    std::map<std::string, int> rejected_by_reason;
    std::string manifest_path;
};

// Synthesized toy subject image: textured disk centered on the figure with the
// stick-figure skeleton drawn on top. Returned mask marks the disk.
Image synthesize_subject_image(const PoseSkeleton& skeleton, int size, Rng& rng,
                               PixelMask* mask_out);

DatasetBuildReport build_dataset(const DatasetBuildOptions& options);

}  // namespace aniadapter
