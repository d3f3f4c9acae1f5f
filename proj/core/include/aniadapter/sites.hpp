#pragma once

#include <string>
#include <vector>

#include "aniadapter/attention.hpp"
#include "aniadapter/checkpoint.hpp"
#include "aniadapter/linalg.hpp"
#include "aniadapter/rng.hpp"

namespace aniadapter {

enum class SitePlacement { down, mid, up };

const char* site_placement_name(SitePlacement p);
SitePlacement site_placement_from_name(const std::string& name);

struct SiteInfo {
    std::string id;
    SitePlacement placement = SitePlacement::down;
};

// Enumerates a U-Net's cross-attention sites in forward order.
struct UnetSpec {
    std::vector<SiteInfo> sites;
    int query_dim = 16;  // d, query/key width at every site

    // 2 down / 1 mid / 2 up, the desk-scale stand-in.
    static UnetSpec surrogate_default(int query_dim = 16);
};

std::vector<SiteInfo> select_sites(const UnetSpec& unet, InjectScope scope);

// The trainable image projections, one fresh (Wk, Wv) pair per attached site.
class InjectionSites {
public:
    struct Site {
        SiteInfo info;
        Mat Wk, Wv;  // D' x d
    };

    // Throws if called on an already-attached instance.
    void attach(const UnetSpec& unet, InjectScope scope, int ref_dim, Rng& rng);
    bool attached() const { return !sites_.empty(); }

    std::vector<Site>& sites() { return sites_; }
    const std::vector<Site>& sites() const { return sites_; }
    Site& site(const std::string& id);
    const Site* find(const std::string& id) const;

    void save_into(TensorArchive& ar) const;
    static InjectionSites load_from(const TensorArchive& ar, const UnetSpec& unet);

private:
    std::vector<Site> sites_;
};

}  // namespace aniadapter
