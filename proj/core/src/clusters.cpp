#include "aniadapter/clusters.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* rating_name(Rating r) {
    switch (r) {
        case Rating::general: return "general";
        case Rating::sensitive: return "sensitive";
        case Rating::questionable: return "questionable";
        case Rating::explicit_: return "explicit";
    }
    return "general";
}

Rating rating_from_name(const std::string& name) {
    if (name == "general" || name == "g") return Rating::general;
    if (name == "sensitive" || name == "s") return Rating::sensitive;
    if (name == "questionable" || name == "q") return Rating::questionable;
    if (name == "explicit" || name == "e") return Rating::explicit_;
    throw DataError("unknown rating: " + name);
}

static std::string normalize_tag(std::string tag) {
    auto issp = [](unsigned char ch) { return std::isspace(ch) != 0; };
    while (!tag.empty() && issp(tag.front())) tag.erase(tag.begin());
    while (!tag.empty() && issp(tag.back())) tag.pop_back();
    std::transform(tag.begin(), tag.end(), tag.begin(),
                   [](unsigned char ch) { return char(std::tolower(ch)); });
    return tag;
}

std::vector<std::string> split_tag_string(const std::string& s) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    size_t start = 0;
    while (start <= s.size()) {
        size_t comma = s.find(',', start);
        std::string piece =
            comma == std::string::npos ? s.substr(start) : s.substr(start, comma - start);
        std::string tag = normalize_tag(piece);
        if (!tag.empty() && seen.insert(tag).second) out.push_back(tag);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

TagRecord parse_metadata_line(const std::string& json_line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("metadata line is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("metadata line is not a JSON object");
    TagRecord rec;
    rec.general_tags = split_tag_string(j.value("tag_string_general", ""));
    rec.character_tags = split_tag_string(j.value("tag_string_character", ""));
    rec.artist_tags = split_tag_string(j.value("tag_string_artist", ""));
    rec.rating = rating_from_name(j.value("rating", "general"));
    return rec;
}

std::vector<TagRecord> load_metadata(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open metadata file: " + path);
    std::vector<TagRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_metadata_line(line));
        } catch (const DataError& e) {
            throw DataError("metadata line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

FilterRules FilterRules::defaults() {
    FilterRules r;
    r.single_count_tags = {"solo", "1girl", "1boy", "1other"};
    r.multi_count_tags = {"2girls", "3girls", "multiple girls", "2boys",
                          "3boys",  "multiple boys", "2others", "multiple others"};
    r.framing_deny_pairs = {
        {"full-body", "portrait"},    {"full-body", "close-up"},
        {"full-body", "cropped legs"}, {"full-body", "cropped torso"},
        {"upper-body", "close-up"},   {"upper-body", "lower body"},
        {"upper-body", "cropped torso"}, {"portrait", "lower body"},
        {"portrait", "cropped legs"},
    };
    return r;
}

static bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

FilterDecision filter_entry(const TagRecord& record, const Taxonomy& taxonomy,
                            const FilterRules& rules) {
    if (record.rating != Rating::general) return {false, "rating"};

    std::vector<std::string> c0, c2;
    for (const auto& tag : record.general_tags) {
        Cluster cl = taxonomy.classify(tag).cluster;
        if (cl == Cluster::c0) c0.push_back(tag);
        if (cl == Cluster::c2) c2.push_back(tag);
    }
    bool single = false;
    for (const auto& tag : c0) {
        if (contains(rules.multi_count_tags, tag)) return {false, "multiple characters"};
        if (contains(rules.single_count_tags, tag)) single = true;
    }
    if (!single) return {false, "no single-count tag"};

    for (const auto& [framing, c2_tag] : rules.framing_deny_pairs)
        if (contains(c2, c2_tag)) return {false, "framing conflict: " + framing + " vs " + c2_tag};

    return {true, ""};
}

SemanticClusters extract_clusters(const TagRecord& record, const Taxonomy& taxonomy) {
    SemanticClusters sc;
    sc.rating = record.rating;
    sc.char_name = record.character_tags;
    for (const auto& tag : record.general_tags) {
        TagClass tc = taxonomy.classify(tag);
        if (tc.cluster == Cluster::unknown) continue;
        sc.c[size_t(tc.cluster)].push_back(tag);
        if (tc.cluster == Cluster::c4) {
            if (!tc.sub) throw DataError("c4 tag without sub-group: " + tag);
            sc.sub_group[tag] = *tc.sub;
        }
    }
    for (const auto& artist : record.artist_tags) sc.c[2].push_back(artist);
    if (sc.c[0].empty()) throw DataError("record has empty identity cluster (C0)");
    return sc;
}

}  // namespace aniadapter
