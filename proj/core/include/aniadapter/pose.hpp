#pragma once

#include <array>
#include <string>

#include "aniadapter/image.hpp"
#include "aniadapter/rng.hpp"

namespace aniadapter {

// OpenPose-style 18-joint layout: 0 nose, 1 neck, 2-4 right arm, 5-7 left arm,
// 8-10 right leg, 11-13 left leg, 14/15 eyes, 16/17 ears.
inline constexpr int kJointCount = 18;

struct Joint {
    double x = 0.0;  // normalized [0,1]
    double y = 0.0;
    double confidence = 0.0;
    bool detected = false;

    bool operator==(const Joint&) const = default;
};

struct PoseSkeleton {
    std::array<Joint, kJointCount> joints;

    int detected_count() const;
    bool any_detected() const { return detected_count() > 0; }

    // Line-delimited records: joint-id x y confidence detected.
    std::string to_text() const;
    static PoseSkeleton from_text(const std::string& text);
    void save(const std::string& path) const;
    static PoseSkeleton load(const std::string& path);

    bool operator==(const PoseSkeleton&) const = default;
};

// A plausible standing figure jittered per seed; used by dataset synthesis.
PoseSkeleton synthetic_pose(Rng& rng);

// Draws white limb segments plus one 3x3 joint marker per detected joint.
// Marker j carries intensity (j+1)/19 so a detector can recover joint ids.
Image render_skeleton(const PoseSkeleton& skeleton, int height, int width);

class PoseBackend {
public:
    virtual ~PoseBackend() = default;
    virtual PoseSkeleton extract(const Image& image, const std::string& source_id) = 0;
};

// Serves skeletons stored as <dir>/<source_id>.pose.
class StoredPoseOracle : public PoseBackend {
public:
    explicit StoredPoseOracle(std::string dir);
    PoseSkeleton extract(const Image& image, const std::string& source_id) override;

private:
    std::string dir_;
};

// Recovers joints from render_skeleton-style marker intensities. Joints whose
// marker intensity is absent come back undetected; a blank image yields an
// all-undetected skeleton.
class StickFigureDetector : public PoseBackend {
public:
    explicit StickFigureDetector(double tolerance = 0.02) : tolerance_(tolerance) {}
    PoseSkeleton extract(const Image& image, const std::string& source_id) override;

private:
    double tolerance_;
};

}  // namespace aniadapter
