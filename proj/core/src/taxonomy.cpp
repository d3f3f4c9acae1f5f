#include "aniadapter/taxonomy.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* cluster_name(Cluster c) {
    switch (c) {
        case Cluster::c0: return "c0";
        case Cluster::c1: return "c1";
        case Cluster::c2: return "c2";
        case Cluster::c3: return "c3";
        case Cluster::c4: return "c4";
        case Cluster::c5: return "c5";
        case Cluster::unknown: return "unknown";
    }
    return "unknown";
}

Cluster cluster_from_name(const std::string& name) {
    if (name == "c0") return Cluster::c0;
    if (name == "c1") return Cluster::c1;
    if (name == "c2") return Cluster::c2;
    if (name == "c3") return Cluster::c3;
    if (name == "c4") return Cluster::c4;
    if (name == "c5") return Cluster::c5;
    if (name == "unknown") return Cluster::unknown;
    throw DataError("unknown cluster name: " + name);
}

const char* tag_kind_name(TagKind k) {
    return k == TagKind::motion ? "motion" : "attribute";
}

TagKind tag_kind_from_name(const std::string& name) {
    if (name == "attribute") return TagKind::attribute;
    if (name == "motion") return TagKind::motion;
    throw DataError("unknown tag kind: " + name);
}

Taxonomy Taxonomy::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open taxonomy table: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

static std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

Taxonomy Taxonomy::parse(const std::string& text) {
    Taxonomy t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("version", 0) == 0 && line.find('\t') == std::string::npos) {
            std::istringstream vs(line);
            std::string word;
            vs >> word >> t.version_;
            continue;
        }
        auto cols = split_tabs(line);
        if (cols.size() < 2)
            throw DataError("taxonomy line " + std::to_string(lineno) + ": expected tag<TAB>cluster");
        const std::string& tag = cols[0];
        if (tag.empty()) throw DataError("taxonomy line " + std::to_string(lineno) + ": empty tag");
        TagClass tc;
        tc.cluster = cluster_from_name(cols[1]);
        if (tc.cluster == Cluster::c4) {
            if (cols.size() < 4)
                throw DataError("taxonomy line " + std::to_string(lineno) +
                                ": c4 rows need region and kind");
            tc.sub = SubGroup{cols[2], tag_kind_from_name(cols[3])};
        }
        if (t.table_.count(tag))
            throw DataError("taxonomy line " + std::to_string(lineno) + ": duplicate tag '" + tag +
                            "'");
        t.table_[tag] = tc;
        if (tc.cluster != Cluster::unknown) t.vocab_[int(tc.cluster)].push_back(tag);
        if (tc.sub && tc.sub->kind == TagKind::motion)
            t.motion_by_region_[tc.sub->region].push_back(tag);
    }
    return t;
}

Taxonomy Taxonomy::builtin() {
    std::string dir;
#ifdef ANIADAPTER_DATA_DIR
    dir = ANIADAPTER_DATA_DIR;
#endif
    if (const char* env = std::getenv("ANIADAPTER_DATA_DIR"); env && *env) dir = env;
    if (dir.empty()) throw DataError("no builtin data directory configured");
    return load(dir + "/taxonomy.tsv");
}

TagClass Taxonomy::classify(const std::string& tag) const {
    auto it = table_.find(tag);
    if (it == table_.end()) return TagClass{};  // unknown
    return it->second;
}

const std::vector<std::string>& Taxonomy::cluster_vocabulary(Cluster c) const {
    static const std::vector<std::string> empty;
    if (c == Cluster::unknown) return empty;
    return vocab_[int(c)];
}

std::vector<std::string> Taxonomy::motion_alternatives(const std::string& tag) const {
    auto tc = classify(tag);
    if (!tc.sub || tc.sub->kind != TagKind::motion) return {};
    std::vector<std::string> out;
    auto it = motion_by_region_.find(tc.sub->region);
    if (it == motion_by_region_.end()) return {};
    for (const auto& cand : it->second)
        if (cand != tag) out.push_back(cand);
    return out;
}

std::vector<std::string> Taxonomy::expression_vocabulary() const {
    static const char* kFacialRegions[] = {"face", "eyes", "mouth"};
    std::vector<std::string> out;
    for (const char* region : kFacialRegions) {
        auto it = motion_by_region_.find(region);
        if (it == motion_by_region_.end()) continue;
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

}  // namespace aniadapter
