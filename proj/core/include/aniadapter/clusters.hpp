#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aniadapter/taxonomy.hpp"

namespace aniadapter {

enum class Rating { general, sensitive, questionable, explicit_ };

const char* rating_name(Rating r);
Rating rating_from_name(const std::string& name);

// One Danbooru-style metadata entry. Tag lists are lowercase, trimmed and
// deduplicated in input order.
struct TagRecord {
    std::vector<std::string> general_tags;
    std::vector<std::string> character_tags;
    std::vector<std::string> artist_tags;
    Rating rating = Rating::general;

    bool operator==(const TagRecord&) const = default;
};

// Splits a comma-separated tag string and normalizes each tag.
std::vector<std::string> split_tag_string(const std::string& s);

// One JSON object per line with keys tag_string_general, tag_string_character,
// tag_string_artist, rating.
TagRecord parse_metadata_line(const std::string& json_line);
std::vector<TagRecord> load_metadata(const std::string& path);

struct SemanticClusters {
    std::array<std::vector<std::string>, 6> c;  // c0..c5
    std::vector<std::string> char_name;
    std::map<std::string, SubGroup> sub_group;  // c4 members only
    Rating rating = Rating::general;

    const std::vector<std::string>& cluster(int i) const { return c.at(size_t(i)); }
    bool operator==(const SemanticClusters&) const = default;
};

// Entry-level dataset gates. The deny list pairs a framing token that prompt
// construction inserts (full-body, upper-body, portrait) with a C2 tag it
// contradicts.
struct FilterRules {
    std::vector<std::string> single_count_tags;
    std::vector<std::string> multi_count_tags;
    std::vector<std::pair<std::string, std::string>> framing_deny_pairs;

    static FilterRules defaults();
};

struct FilterDecision {
    bool accepted = false;
    std::string reason;  // empty iff accepted
};

FilterDecision filter_entry(const TagRecord& record, const Taxonomy& taxonomy,
                            const FilterRules& rules);

// Partitions a record's tags into C0..C5 plus character names. Unclassified
// tags are dropped; artist tags are appended to C2.
SemanticClusters extract_clusters(const TagRecord& record, const Taxonomy& taxonomy);

}  // namespace aniadapter
