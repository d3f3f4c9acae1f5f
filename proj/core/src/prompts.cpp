#include "aniadapter/prompts.hpp"

#include <algorithm>
#include <fstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

PromptConstants PromptConstants::defaults() {
    PromptConstants pc;
    pc.quality = {"masterpiece", "great score", "high score", "absurdres"};
    pc.neutral_view = {"straight-on", "looking at viewer"};
    pc.scene_pool = {
        "in the kitchen",          "on a rainy street",       "in a classroom",
        "at the beach",            "in a flower garden",      "on a rooftop at sunset",
        "in a crowded train station", "inside a cozy cafe",   "in a snowy forest",
        "at a summer festival",    "in a library",            "on a wooden bridge",
        "under cherry blossoms",   "in a neon-lit alley",     "on a sand dune",
        "beside a campfire",       "in an old castle hall",   "on a ferris wheel",
        "in a convenience store",  "at the school gate",
    };
    return pc;
}

void PromptConstants::load_scene_pool(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open scene pool: " + path);
    std::vector<std::string> pool;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') pool.push_back(line);
    }
    if (pool.empty()) throw DataError("scene pool file is empty: " + path);
    scene_pool = std::move(pool);
}

const char* ref_kind_name(RefKind k) {
    switch (k) {
        case RefKind::orig: return "orig";
        case RefKind::full: return "full";
        case RefKind::upper: return "upper";
        case RefKind::portrait: return "portrait";
    }
    return "orig";
}

RefKind ref_kind_from_name(const std::string& name) {
    if (name == "orig") return RefKind::orig;
    if (name == "full") return RefKind::full;
    if (name == "upper") return RefKind::upper;
    if (name == "portrait") return RefKind::portrait;
    throw DataError("unknown reference prompt kind: " + name);
}

static void append(std::vector<std::string>& out, const std::vector<std::string>& slice) {
    out.insert(out.end(), slice.begin(), slice.end());
}

std::vector<std::string> build_reference_prompt(const SemanticClusters& clusters, RefKind kind,
                                                const PromptConstants& constants) {
    if (clusters.c[0].empty())
        throw DataError("reference prompt requires a non-empty identity cluster c0");
    std::vector<std::string> out;
    append(out, clusters.c[0]);
    append(out, clusters.char_name);
    switch (kind) {
        case RefKind::orig:
            out.push_back(rating_name(clusters.rating));
            append(out, clusters.c[1]);
            append(out, clusters.c[2]);
            append(out, clusters.c[3]);
            append(out, clusters.c[4]);
            break;
        case RefKind::full:
            out.push_back("full-body");
            append(out, constants.neutral_view);
            append(out, clusters.c[2]);
            break;
        case RefKind::upper:
            out.push_back("upper-body");
            append(out, constants.neutral_view);
            append(out, clusters.c[2]);
            break;
        case RefKind::portrait:
            out.push_back("portrait");
            append(out, clusters.c[2]);
            break;
    }
    append(out, constants.quality);
    return out;
}

std::vector<std::string> build_training_prompt(const SemanticClusters& clusters) {
    std::vector<std::string> out;
    for (int i = 1; i <= 5; ++i) append(out, clusters.c[size_t(i)]);
    return out;
}

SubstitutionResult substitute_motion_tags(const std::vector<std::string>& c4, uint64_t seed,
                                          const Taxonomy& taxonomy) {
    Rng rng(seed);
    SubstitutionResult res;
    res.tags.reserve(c4.size());
    for (const auto& tag : c4) {
        TagClass tc = taxonomy.classify(tag);
        if (!tc.sub || tc.sub->kind != TagKind::motion) {
            res.tags.push_back(tag);
            continue;
        }
        auto alts = taxonomy.motion_alternatives(tag);
        if (alts.empty()) {
            res.tags.push_back(tag);
            res.passed_through.push_back(tag);
            continue;
        }
        const std::string& pick = alts[rng.uniform_index(alts.size())];
        res.tags.push_back(pick);
        res.replaced.push_back({tag, pick});
    }
    return res;
}

const char* edit_task_name(EditTask t) {
    switch (t) {
        case EditTask::body_motion: return "body_motion";
        case EditTask::posture_view: return "posture_view";
        case EditTask::expression: return "expression";
        case EditTask::scene: return "scene";
        case EditTask::pose_cond: return "pose_cond";
    }
    return "body_motion";
}

EditTask edit_task_from_name(const std::string& name) {
    for (EditTask t : all_edit_tasks())
        if (name == edit_task_name(t)) return t;
    throw DataError("unknown edit task: " + name);
}

const std::vector<EditTask>& all_edit_tasks() {
    static const std::vector<EditTask> tasks = {EditTask::body_motion, EditTask::posture_view,
                                                EditTask::expression, EditTask::scene,
                                                EditTask::pose_cond};
    return tasks;
}

static std::string pick_excluding(Rng& rng, const std::vector<std::string>& pool,
                                  const std::vector<std::string>& exclude,
                                  const std::string& what) {
    std::vector<std::string> eligible;
    for (const auto& cand : pool)
        if (std::find(exclude.begin(), exclude.end(), cand) == exclude.end())
            eligible.push_back(cand);
    if (eligible.empty()) throw DataError("no " + what + " candidates available");
    return eligible[rng.uniform_index(eligible.size())];
}

EditPrompt build_edit_prompt(const SemanticClusters& clusters, EditTask task, uint64_t seed,
                             const Taxonomy& taxonomy, const PromptConstants& constants) {
    if (clusters.c[0].empty())
        throw DataError("edit prompt requires a non-empty identity cluster c0");
    Rng rng(seed);
    EditPrompt ep;
    ep.task = task;
    append(ep.tags, clusters.c[0]);
    switch (task) {
        case EditTask::body_motion: {
            auto sub = substitute_motion_tags(clusters.c[4], seed, taxonomy);
            append(ep.tags, sub.tags);
            ep.substitutions = std::move(sub.replaced);
            append(ep.tags, constants.quality);
            break;
        }
        case EditTask::posture_view:
        case EditTask::pose_cond: {
            // pose_cond is the full-body posture edit driven by a skeleton.
            std::string framing = task == EditTask::pose_cond
                                      ? "full-body"
                                      : (rng.uniform() < 0.5 ? "full-body" : "upper-body");
            std::string new_pose = pick_excluding(rng, taxonomy.cluster_vocabulary(Cluster::c3),
                                                  clusters.c[3], "new_pose");
            ep.tags.push_back(framing);
            append(ep.tags, clusters.c[1]);
            ep.tags.push_back(new_pose);
            append(ep.tags, constants.quality);
            ep.requires_pose = task == EditTask::pose_cond;
            break;
        }
        case EditTask::expression: {
            std::string expr = pick_excluding(rng, taxonomy.expression_vocabulary(), clusters.c[4],
                                              "new_expression");
            ep.tags.push_back("portrait");
            ep.tags.push_back(expr);
            append(ep.tags, constants.quality);
            break;
        }
        case EditTask::scene: {
            if (constants.scene_pool.empty()) throw DataError("no scene_description candidates available");
            ep.tags.push_back(constants.scene_pool[rng.uniform_index(constants.scene_pool.size())]);
            break;
        }
    }
    return ep;
}

static uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

PromptBundle build_prompt_bundle(const SemanticClusters& clusters, uint64_t seed,
                                 const Taxonomy& taxonomy, const PromptConstants& constants,
                                 const std::vector<EditTask>& tasks) {
    PromptBundle pb;
    pb.ref_orig = build_reference_prompt(clusters, RefKind::orig, constants);
    pb.ref_full = build_reference_prompt(clusters, RefKind::full, constants);
    pb.ref_upper = build_reference_prompt(clusters, RefKind::upper, constants);
    pb.ref_portrait = build_reference_prompt(clusters, RefKind::portrait, constants);
    pb.training = build_training_prompt(clusters);
    for (EditTask t : tasks) {
        uint64_t task_seed = seed ^ fnv1a(edit_task_name(t));
        pb.edits[edit_task_name(t)] = build_edit_prompt(clusters, t, task_seed, taxonomy, constants);
    }
    return pb;
}

std::string render_prompt(const std::vector<std::string>& tags) {
    std::string out;
    for (size_t i = 0; i < tags.size(); ++i) {
        if (i) out += ", ";
        out += tags[i];
    }
    return out;
}

}  // namespace aniadapter
