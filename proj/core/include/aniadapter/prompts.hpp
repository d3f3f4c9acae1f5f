#pragma once

#include <map>
#include <string>
#include <vector>

#include "aniadapter/clusters.hpp"
#include "aniadapter/rng.hpp"
#include "aniadapter/taxonomy.hpp"

namespace aniadapter {

// Shared vocabulary for prompt assembly. The scene pool is a stand-in list and
// can be replaced wholesale (e.g. from a file, one description per line).
struct PromptConstants {
    std::vector<std::string> quality;       // appended last, fixed order
    std::vector<std::string> neutral_view;  // standardized viewpoint tokens
    std::vector<std::string> scene_pool;

    static PromptConstants defaults();
    void load_scene_pool(const std::string& path);
};

enum class RefKind { orig, full, upper, portrait };

const char* ref_kind_name(RefKind k);
RefKind ref_kind_from_name(const std::string& name);

// Reference prompts, one per framing:
//   orig:     C0 + char_name + rating + C1 + C2 + C3 + C4 + quality
//   full:     C0 + char_name + "full-body" + neutral_view + C2 + quality
//   upper:    C0 + char_name + "upper-body" + neutral_view + C2 + quality
//   portrait: C0 + char_name + "portrait" + C2 + quality
std::vector<std::string> build_reference_prompt(const SemanticClusters& clusters, RefKind kind,
                                                const PromptConstants& constants);

// C1 + C2 + C3 + C4 + C5; never contains character names or a rating token.
std::vector<std::string> build_training_prompt(const SemanticClusters& clusters);

struct Substitution {
    std::string original;
    std::string replacement;
    bool operator==(const Substitution&) const = default;
};

struct SubstitutionResult {
    std::vector<std::string> tags;          // same length/order as input
    std::vector<Substitution> replaced;     // motion tags that changed
    std::vector<std::string> passed_through;  // motion tags with no alternative
};

// Replaces each motion-kind tag with a uniformly sampled motion tag from the
// same anatomical sub-group. Attribute tags are untouched; positions are
// preserved.
SubstitutionResult substitute_motion_tags(const std::vector<std::string>& c4, uint64_t seed,
                                          const Taxonomy& taxonomy);

enum class EditTask { body_motion, posture_view, expression, scene, pose_cond };

const char* edit_task_name(EditTask t);
EditTask edit_task_from_name(const std::string& name);
const std::vector<EditTask>& all_edit_tasks();

struct EditPrompt {
    EditTask task = EditTask::body_motion;
    std::vector<std::string> tags;
    bool requires_pose = false;
    std::vector<Substitution> substitutions;  // body_motion only
    bool operator==(const EditPrompt&) const = default;
};

// Task compositions:
//   body_motion:  C0 + substitute(C4) + quality
//   posture_view: C0 + framing + C1 + new_pose + quality   (framing picked per seed)
//   expression:   C0 + "portrait" + new_expression + quality
//   scene:        C0 + scene_description
//   pose_cond:    full-body posture edit, requires_pose set
// new_pose is drawn from the posture vocabulary, new_expression from facial
// motion tags, scene_description from the scene pool; all draws are seeded.
EditPrompt build_edit_prompt(const SemanticClusters& clusters, EditTask task, uint64_t seed,
                             const Taxonomy& taxonomy, const PromptConstants& constants);

struct PromptBundle {
    std::vector<std::string> ref_orig, ref_full, ref_upper, ref_portrait, training;
    std::map<std::string, EditPrompt> edits;  // keyed by edit_task_name
    bool operator==(const PromptBundle&) const = default;
};

PromptBundle build_prompt_bundle(const SemanticClusters& clusters, uint64_t seed,
                                 const Taxonomy& taxonomy, const PromptConstants& constants,
                                 const std::vector<EditTask>& tasks);

// Joins tags with ", " for model consumption and display.
std::string render_prompt(const std::vector<std::string>& tags);

}  // namespace aniadapter
