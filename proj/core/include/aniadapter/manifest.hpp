#pragma once

#include <string>
#include <vector>

#include "aniadapter/clusters.hpp"
#include "aniadapter/prompts.hpp"

namespace aniadapter {

// One dataset case: asset locations plus everything derived from the metadata
// entry. pose_path may be empty when no skeleton was produced.
struct ManifestEntry {
    std::string id;
    std::string image_path;
    std::string mask_path;
    std::string pose_path;
    SemanticClusters clusters;
    PromptBundle prompts;

    bool operator==(const ManifestEntry&) const = default;
};

std::string manifest_entry_to_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line);

// Writes one JSON record per line with stable field ordering. Throws on
// duplicate ids or unwritable paths.
void emit_manifest(const std::vector<ManifestEntry>& entries, const std::string& out_path);
std::vector<ManifestEntry> parse_manifest(const std::string& path);

}  // namespace aniadapter
