#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aniadapter {

// Six-way semantic tag taxonomy:
//   C0 identity/count, C1 view/framing, C2 style/aesthetics, C3 global posture,
//   C4 local body-part attributes (with region + attribute/motion sub-grouping),
//   C5 visual patterns.
enum class Cluster { c0 = 0, c1, c2, c3, c4, c5, unknown };

enum class TagKind { attribute, motion };

struct SubGroup {
    std::string region;  // anatomical region or wearable component
    TagKind kind = TagKind::attribute;

    bool operator==(const SubGroup&) const = default;
};

struct TagClass {
    Cluster cluster = Cluster::unknown;
    std::optional<SubGroup> sub;  // present for C4 members only
};

const char* cluster_name(Cluster c);
Cluster cluster_from_name(const std::string& name);
const char* tag_kind_name(TagKind k);
TagKind tag_kind_from_name(const std::string& name);

// Versioned plain-text table, one tag per line:
//   tag<TAB>cluster[<TAB>region<TAB>kind]
// region/kind are required for c4 rows and ignored otherwise. '#' comments.
// Tags absent from the table classify as unknown; unknown is a value, not an
// error, and unknown tags never enter prompt construction.
class Taxonomy {
public:
    static Taxonomy load(const std::string& path);
    static Taxonomy parse(const std::string& text);
    // The demonstrative table shipped with the repo (worked example + ~200
    // common tags). User-supplied tables replace it wholesale.
    static Taxonomy builtin();

    TagClass classify(const std::string& tag) const;

    // All table tags of a cluster, in table order.
    const std::vector<std::string>& cluster_vocabulary(Cluster c) const;

    // Motion tags sharing `tag`'s sub-group, excluding `tag` itself.
    std::vector<std::string> motion_alternatives(const std::string& tag) const;

    // C4 motion tags in facial regions (face / eyes / mouth); the
    // new-expression pool for edit prompts.
    std::vector<std::string> expression_vocabulary() const;

    int version() const { return version_; }
    size_t size() const { return table_.size(); }

private:
    int version_ = 1;
    std::map<std::string, TagClass> table_;
    std::vector<std::string> vocab_[6];
    // (region -> motion tags in table order)
    std::map<std::string, std::vector<std::string>> motion_by_region_;
};

}  // namespace aniadapter
