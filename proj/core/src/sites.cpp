#include "aniadapter/sites.hpp"

#include <cmath>

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* site_placement_name(SitePlacement p) {
    switch (p) {
        case SitePlacement::down: return "down";
        case SitePlacement::mid: return "mid";
        case SitePlacement::up: return "up";
    }
    return "down";
}

SitePlacement site_placement_from_name(const std::string& name) {
    if (name == "down") return SitePlacement::down;
    if (name == "mid") return SitePlacement::mid;
    if (name == "up") return SitePlacement::up;
    throw DataError("unknown site placement: " + name);
}

UnetSpec UnetSpec::surrogate_default(int query_dim) {
    UnetSpec u;
    u.query_dim = query_dim;
    u.sites = {{"down0", SitePlacement::down},
               {"down1", SitePlacement::down},
               {"mid0", SitePlacement::mid},
               {"up0", SitePlacement::up},
               {"up1", SitePlacement::up}};
    return u;
}

std::vector<SiteInfo> select_sites(const UnetSpec& unet, InjectScope scope) {
    std::vector<SiteInfo> out;
    for (const SiteInfo& s : unet.sites)
        if (scope == InjectScope::full_blocks || s.placement == SitePlacement::up)
            out.push_back(s);
    return out;
}

void InjectionSites::attach(const UnetSpec& unet, InjectScope scope, int ref_dim, Rng& rng) {
    if (attached()) throw DataError("injection sites already attached");
    for (const SiteInfo& info : select_sites(unet, scope)) {
        Rng site_rng = rng.fork("site " + info.id);
        Site s;
        s.info = info;
        double scale = 1.0 / std::sqrt(double(ref_dim));
        s.Wk = random_matrix(site_rng, ref_dim, unet.query_dim, scale);
        s.Wv = random_matrix(site_rng, ref_dim, unet.query_dim, scale);
        sites_.push_back(std::move(s));
    }
}

InjectionSites::Site& InjectionSites::site(const std::string& id) {
    for (Site& s : sites_)
        if (s.info.id == id) return s;
    throw DataError("no attached site with id: " + id);
}

const InjectionSites::Site* InjectionSites::find(const std::string& id) const {
    for (const Site& s : sites_)
        if (s.info.id == id) return &s;
    return nullptr;
}

void InjectionSites::save_into(TensorArchive& ar) const {
    for (const Site& s : sites_) {
        ar.add("site." + s.info.id + ".wk", s.Wk);
        ar.add("site." + s.info.id + ".wv", s.Wv);
    }
}

InjectionSites InjectionSites::load_from(const TensorArchive& ar, const UnetSpec& unet) {
    InjectionSites out;
    for (const SiteInfo& info : unet.sites) {
        std::string wk = "site." + info.id + ".wk";
        if (!ar.has(wk)) continue;
        Site s;
        s.info = info;
        s.Wk = ar.get(wk);
        s.Wv = ar.get("site." + info.id + ".wv");
        out.sites_.push_back(std::move(s));
    }
    if (out.sites_.empty()) throw DataError("archive holds no injection site tensors");
    return out;
}

}  // namespace aniadapter
