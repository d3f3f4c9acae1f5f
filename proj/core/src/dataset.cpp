#include "aniadapter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aniadapter/error.hpp"
#include "aniadapter/image.hpp"
#include "aniadapter/pose.hpp"

namespace aniadapter {

namespace fs = std::filesystem;

Image synthesize_subject_image(const PoseSkeleton& skeleton, int size, Rng& rng,
                               PixelMask* mask_out) {
    // Figure centroid anchors the subject disk.
    double cx = 0.0, cy = 0.0;
    int n = 0;
    for (const Joint& j : skeleton.joints) {
        if (!j.detected) continue;
        cx += j.x;
        cy += j.y;
        ++n;
    }
    if (n > 0) {
        cx /= n;
        cy /= n;
    } else {
        cx = cy = 0.5;
    }

    double radius = 0.38 * size;
    double fx = rng.uniform(1.5, 4.0), fy = rng.uniform(1.5, 4.0);
    double px = rng.uniform(0.0, 2.0 * M_PI), py = rng.uniform(0.0, 2.0 * M_PI);
    double base = rng.uniform(0.25, 0.55);

    Image img(size, size, 0.0);
    PixelMask mask(size, size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double dx = x - cx * (size - 1);
            double dy = y - cy * (size - 1);
            if (dx * dx + dy * dy > radius * radius) continue;
            double v = base + 0.2 * std::sin(fx * x / double(size) * 2.0 * M_PI + px) +
                       0.2 * std::sin(fy * y / double(size) * 2.0 * M_PI + py);
            img.at(y, x) = std::clamp(v, 0.05, 0.9);
            mask.at(y, x) = 1;
        }

    Image figure = render_skeleton(skeleton, size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (figure.at(y, x) > 0.0) {
                img.at(y, x) = figure.at(y, x);
                mask.at(y, x) = 1;
            }
    if (mask_out) *mask_out = mask;
    return img;
}

DatasetBuildReport build_dataset(const DatasetBuildOptions& options) {
    Taxonomy taxonomy = options.taxonomy_path.empty() ? Taxonomy::builtin()
                                                      : Taxonomy::load(options.taxonomy_path);
    std::vector<TagRecord> records = load_metadata(options.metadata_path);
    FilterRules rules = FilterRules::defaults();
    PromptConstants constants = PromptConstants::defaults();
    std::vector<EditTask> tasks = options.tasks.empty() ? all_edit_tasks() : options.tasks;

    fs::create_directories(options.out_dir);
    if (options.synthesize) {
        fs::create_directories(fs::path(options.out_dir) / "images");
        fs::create_directories(fs::path(options.out_dir) / "masks");
        fs::create_directories(fs::path(options.out_dir) / "poses");
    }

    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };

    DatasetBuildReport report;
    std::vector<ManifestEntry> entries;
    for (size_t idx = 0; idx < records.size(); ++idx) {
        ++report.total;
        char buf[32];
        std::snprintf(buf, sizeof buf, "entry%05zu", idx);
        std::string id = buf;

        FilterDecision decision = filter_entry(records[idx], taxonomy, rules);
        if (!decision.accepted) {
            ++report.rejected_by_reason[decision.reason];
            log("rejected " + id + ": " + decision.reason);
            continue;
        }

        ManifestEntry entry;
        entry.id = id;
        entry.clusters = extract_clusters(records[idx], taxonomy);
        uint64_t prompt_seed = Rng(options.seed).fork("prompts " + id).next_u64();
        entry.prompts = build_prompt_bundle(entry.clusters, prompt_seed, taxonomy, constants,
                                            tasks);

        if (options.synthesize) {
            Rng asset_rng = Rng(options.seed).fork("assets " + id);
            PoseSkeleton skeleton = synthetic_pose(asset_rng);
            PixelMask mask;
            Image image = synthesize_subject_image(skeleton, options.image_size, asset_rng, &mask);

            entry.image_path = "images/" + id + ".pgm";
            entry.mask_path = "masks/" + id + ".mask.png";
            entry.pose_path = "poses/" + id + ".pose";
            write_pgm(image, options.out_dir + "/" + entry.image_path);
            write_mask_png(mask, options.out_dir + "/" + entry.mask_path);
            skeleton.save(options.out_dir + "/" + entry.pose_path);
        }

        entries.push_back(std::move(entry));
        ++report.accepted;
    }

    report.manifest_path = options.out_dir + "/manifest.jsonl";
    emit_manifest(entries, report.manifest_path);
    return report;
}

}  // namespace aniadapter
