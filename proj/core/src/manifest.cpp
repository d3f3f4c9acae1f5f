#include "aniadapter/manifest.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "aniadapter/error.hpp"

namespace aniadapter {

using ordered_json = nlohmann::ordered_json;

static ordered_json clusters_to_json(const SemanticClusters& sc) {
    ordered_json j;
    for (int i = 0; i < 6; ++i) j["c" + std::to_string(i)] = sc.c[size_t(i)];
    j["char_name"] = sc.char_name;
    j["rating"] = rating_name(sc.rating);
    ordered_json sub = ordered_json::object();
    for (const auto& [tag, sg] : sc.sub_group)
        sub[tag] = {{"region", sg.region}, {"kind", tag_kind_name(sg.kind)}};
    j["sub_group"] = sub;
    return j;
}

static SemanticClusters clusters_from_json(const ordered_json& j) {
    SemanticClusters sc;
    for (int i = 0; i < 6; ++i)
        sc.c[size_t(i)] = j.at("c" + std::to_string(i)).get<std::vector<std::string>>();
    sc.char_name = j.at("char_name").get<std::vector<std::string>>();
    sc.rating = rating_from_name(j.at("rating").get<std::string>());
    for (const auto& [tag, sg] : j.at("sub_group").items())
        sc.sub_group[tag] = SubGroup{sg.at("region").get<std::string>(),
                                     tag_kind_from_name(sg.at("kind").get<std::string>())};
    return sc;
}

static ordered_json edit_to_json(const EditPrompt& ep) {
    ordered_json j;
    j["tags"] = ep.tags;
    j["requires_pose"] = ep.requires_pose;
    ordered_json subs = ordered_json::array();
    for (const auto& s : ep.substitutions)
        subs.push_back({{"original", s.original}, {"replacement", s.replacement}});
    j["substitutions"] = subs;
    return j;
}

static EditPrompt edit_from_json(const std::string& task_name, const ordered_json& j) {
    EditPrompt ep;
    ep.task = edit_task_from_name(task_name);
    ep.tags = j.at("tags").get<std::vector<std::string>>();
    ep.requires_pose = j.at("requires_pose").get<bool>();
    for (const auto& s : j.at("substitutions"))
        ep.substitutions.push_back(
            {s.at("original").get<std::string>(), s.at("replacement").get<std::string>()});
    return ep;
}

std::string manifest_entry_to_line(const ManifestEntry& entry) {
    ordered_json j;
    j["id"] = entry.id;
    j["image_path"] = entry.image_path;
    j["mask_path"] = entry.mask_path;
    j["pose_path"] = entry.pose_path;
    j["clusters"] = clusters_to_json(entry.clusters);
    ordered_json prompts;
    prompts["ref_orig"] = entry.prompts.ref_orig;
    prompts["ref_full"] = entry.prompts.ref_full;
    prompts["ref_upper"] = entry.prompts.ref_upper;
    prompts["ref_portrait"] = entry.prompts.ref_portrait;
    prompts["training"] = entry.prompts.training;
    j["prompts"] = prompts;
    ordered_json edits = ordered_json::object();
    for (const auto& [name, ep] : entry.prompts.edits) edits[name] = edit_to_json(ep);
    j["edits"] = edits;
    return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
        throw DataError(std::string("manifest line is not valid JSON: ") + e.what());
    }
    ManifestEntry entry;
    try {
        entry.id = j.at("id").get<std::string>();
        entry.image_path = j.at("image_path").get<std::string>();
        entry.mask_path = j.at("mask_path").get<std::string>();
        entry.pose_path = j.at("pose_path").get<std::string>();
        entry.clusters = clusters_from_json(j.at("clusters"));
        const auto& prompts = j.at("prompts");
        entry.prompts.ref_orig = prompts.at("ref_orig").get<std::vector<std::string>>();
        entry.prompts.ref_full = prompts.at("ref_full").get<std::vector<std::string>>();
        entry.prompts.ref_upper = prompts.at("ref_upper").get<std::vector<std::string>>();
        entry.prompts.ref_portrait = prompts.at("ref_portrait").get<std::vector<std::string>>();
        entry.prompts.training = prompts.at("training").get<std::vector<std::string>>();
        for (const auto& [name, ep] : j.at("edits").items())
            entry.prompts.edits[name] = edit_from_json(name, ep);
    } catch (const ordered_json::exception& e) {
        throw DataError(std::string("manifest record missing field: ") + e.what());
    }
    return entry;
}

void emit_manifest(const std::vector<ManifestEntry>& entries, const std::string& out_path) {
    std::set<std::string> ids;
    for (const auto& e : entries)
        if (!ids.insert(e.id).second) throw DataError("duplicate manifest id: " + e.id);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw DataError("cannot write manifest: " + out_path);
    for (const auto& e : entries) f << manifest_entry_to_line(e) << '\n';
    if (!f) throw DataError("manifest write failed: " + out_path);
}

std::vector<ManifestEntry> parse_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_manifest_line(line));
        } catch (const DataError& e) {
            throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second)
            throw DataError("duplicate manifest id: " + out.back().id);
    }
    return out;
}

}  // namespace aniadapter
