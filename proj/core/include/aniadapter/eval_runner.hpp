#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aniadapter/clip_surrogate.hpp"
#include "aniadapter/manifest.hpp"
#include "aniadapter/metrics.hpp"
#include "aniadapter/pose.hpp"
#include "aniadapter/segment.hpp"

namespace aniadapter {

// Produces the n samples for one evaluation case. The inference pipeline and
// the test stubs both sit behind this.
class CaseGenerator {
public:
    virtual ~CaseGenerator() = default;
    virtual std::vector<Image> generate(const ManifestEntry& entry, const EditPrompt& edit,
                                        const Image& reference, const PixelMask& mask,
                                        const PoseSkeleton* pose, int n, uint64_t seed) = 0;
};

struct EvalOptions {
    int samples_per_case = 4;
    int failure_min_joints = 4;
    uint64_t seed = 0;
    std::string asset_root;                // base for relative manifest paths
    SegmentBackend* sample_segmenter = nullptr;  // null -> reuse the reference mask
    std::function<void(const std::string&)> log;  // optional progress sink
};

struct CaseRow {
    std::string case_id;
    std::string task;
    std::string metric;
    double value = 0.0;
};

struct TaskSummary {
    std::string task;
    int cases = 0;
    int generator_failures = 0;
    int samples = 0;
    // Table order: clip_t, clip_i_masked, lpips, lpips_div, psnr, fid, akd,
    // mkr, failure; absent metrics are omitted rather than faked.
    std::vector<std::pair<std::string, double>> metrics;

    const double* metric(const std::string& name) const;
};

struct MetricsReport {
    std::vector<TaskSummary> tasks;   // one per evaluated task, then "all"
    std::vector<CaseRow> rows;
    int failure_min_joints = 4;

    const TaskSummary* task(const std::string& name) const;
    std::string to_text() const;
    std::string to_json() const;
    std::string rows_jsonl() const;
};

MetricsReport run_eval(const std::vector<ManifestEntry>& entries,
                       const std::vector<std::string>& tasks, CaseGenerator& generator,
                       EmbeddingBackend& embedder, DistanceBackend& lpips,
                       PoseBackend& pose_extractor, const EvalOptions& options);

}  // namespace aniadapter
