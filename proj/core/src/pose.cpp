#include "aniadapter/pose.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

int PoseSkeleton::detected_count() const {
    int n = 0;
    for (const Joint& j : joints) n += j.detected ? 1 : 0;
    return n;
}

std::string PoseSkeleton::to_text() const {
    std::ostringstream out;
    char buf[160];
    for (int i = 0; i < kJointCount; ++i) {
        const Joint& j = joints[size_t(i)];
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %d\n", i, j.x, j.y, j.confidence,
                      j.detected ? 1 : 0);
        out << buf;
    }
    return out.str();
}

PoseSkeleton PoseSkeleton::from_text(const std::string& text) {
    PoseSkeleton sk;
    std::istringstream in(text);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int id, det;
        double x, y, conf;
        if (!(ls >> id >> x >> y >> conf >> det))
            throw DataError("malformed skeleton line: " + line);
        if (id < 0 || id >= kJointCount) throw DataError("skeleton joint id out of range");
        Joint& j = sk.joints[size_t(id)];
        j.x = x;
        j.y = y;
        j.confidence = conf;
        j.detected = det != 0;
        if (j.detected && (x < 0 || x > 1 || y < 0 || y > 1))
            throw DataError("detected joint coordinates outside [0,1]");
        ++rows;
    }
    if (rows != kJointCount) throw DataError("skeleton file must list all 18 joints");
    return sk;
}

void PoseSkeleton::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write skeleton: " + path);
    f << to_text();
}

PoseSkeleton PoseSkeleton::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open skeleton: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

PoseSkeleton synthetic_pose(Rng& rng) {
    // Canonical standing figure in normalized coordinates.
    static const double base[kJointCount][2] = {
        {0.50, 0.12},  // nose
        {0.50, 0.22},  // neck
        {0.58, 0.23}, {0.63, 0.35}, {0.66, 0.47},  // right arm
        {0.42, 0.23}, {0.37, 0.35}, {0.34, 0.47},  // left arm
        {0.56, 0.50}, {0.57, 0.68}, {0.58, 0.86},  // right leg
        {0.44, 0.50}, {0.43, 0.68}, {0.42, 0.86},  // left leg
        {0.53, 0.10}, {0.47, 0.10},                // eyes
        {0.56, 0.12}, {0.44, 0.12},                // ears
    };
    PoseSkeleton sk;
    double dx = rng.uniform(-0.06, 0.06);
    double dy = rng.uniform(-0.04, 0.04);
    for (int i = 0; i < kJointCount; ++i) {
        Joint& j = sk.joints[size_t(i)];
        j.x = std::clamp(base[i][0] + dx + rng.uniform(-0.015, 0.015), 0.0, 1.0);
        j.y = std::clamp(base[i][1] + dy + rng.uniform(-0.015, 0.015), 0.0, 1.0);
        j.confidence = rng.uniform(0.7, 1.0);
        j.detected = true;
    }
    return sk;
}

static void draw_line(Image& img, int r0, int c0, int r1, int c1, double v) {
    int steps = std::max(std::abs(r1 - r0), std::abs(c1 - c0));
    for (int s = 0; s <= steps; ++s) {
        double f = steps == 0 ? 0.0 : double(s) / steps;
        int r = int(std::lround(r0 + f * (r1 - r0)));
        int c = int(std::lround(c0 + f * (c1 - c0)));
        if (r >= 0 && r < img.height && c >= 0 && c < img.width) img.at(r, c) = v;
    }
}

static const int kLimbs[][2] = {
    {0, 1},  {1, 2},  {2, 3},  {3, 4},  {1, 5},   {5, 6},  {6, 7},
    {1, 8},  {8, 9},  {9, 10}, {1, 11}, {11, 12}, {12, 13},
    {0, 14}, {0, 15}, {14, 16}, {15, 17},
};

Image render_skeleton(const PoseSkeleton& skeleton, int height, int width) {
    Image img(height, width, 0.0);
    auto px = [&](const Joint& j, int& r, int& c) {
        r = int(std::lround(j.y * (height - 1)));
        c = int(std::lround(j.x * (width - 1)));
    };
    for (const auto& limb : kLimbs) {
        const Joint& a = skeleton.joints[size_t(limb[0])];
        const Joint& b = skeleton.joints[size_t(limb[1])];
        if (!a.detected || !b.detected) continue;
        int r0, c0, r1, c1;
        px(a, r0, c0);
        px(b, r1, c1);
        draw_line(img, r0, c0, r1, c1, 1.0);
    }
    for (int i = 0; i < kJointCount; ++i) {
        const Joint& j = skeleton.joints[size_t(i)];
        if (!j.detected) continue;
        int r, c;
        px(j, r, c);
        double v = double(i + 1) / 19.0;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                int rr = r + dr, cc = c + dc;
                if (rr >= 0 && rr < img.height && cc >= 0 && cc < img.width) img.at(rr, cc) = v;
            }
    }
    return img;
}

StoredPoseOracle::StoredPoseOracle(std::string dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw BackendError("skeleton directory not found: " + dir_);
}

PoseSkeleton StoredPoseOracle::extract(const Image&, const std::string& source_id) {
    if (source_id.empty()) throw BackendError("stored pose oracle needs a source id");
    std::string path = dir_ + "/" + source_id + ".pose";
    if (!std::filesystem::exists(path))
        throw BackendError("no stored skeleton for '" + source_id + "' at " + path);
    return PoseSkeleton::load(path);
}

PoseSkeleton StickFigureDetector::extract(const Image& image, const std::string&) {
    PoseSkeleton sk;
    for (int i = 0; i < kJointCount; ++i) {
        double target = double(i + 1) / 19.0;
        double sum_r = 0, sum_c = 0;
        int count = 0;
        for (int r = 0; r < image.height; ++r)
            for (int c = 0; c < image.width; ++c)
                if (std::abs(image.at(r, c) - target) <= tolerance_) {
                    sum_r += r;
                    sum_c += c;
                    ++count;
                }
        Joint& j = sk.joints[size_t(i)];
        if (count == 0) continue;
        double cr = sum_r / count;
        double cc = sum_c / count;
        j.x = image.width > 1 ? cc / (image.width - 1) : 0.5;
        j.y = image.height > 1 ? cr / (image.height - 1) : 0.5;
        j.x = std::clamp(j.x, 0.0, 1.0);
        j.y = std::clamp(j.y, 0.0, 1.0);
        j.confidence = 1.0;
        j.detected = true;
    }
    return sk;
}

}  // namespace aniadapter
