#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pickwhy/ranking.hpp"
#include "pickwhy/scene_model.hpp"

namespace pickwhy {

// Four explanation variants for a failed pick:
//   none   - empty text (the deployed-robot baseline),
//   cb     - a coarse context phrase ("... is occluded"),
//   ssg    - the full subgraph around the desired object,
//   ssg_r  - only the top-ranked relation(s) of that subgraph.

enum class ExplanationVariant { none, cb, ssg, ssg_r };

std::string to_string(ExplanationVariant v);
ExplanationVariant explanation_variant_from_string(std::string_view s);

// Surface forms for predicates and attributes. Every vocabulary entry used
// in a scene must have one.
struct PhraseLexicon {
    std::map<std::string, std::string> predicate_surface;
    std::map<std::string, std::string> attribute_surface;
    std::string article = "the";

    static PhraseLexicon defaults();
};

struct Explanation {
    ExplanationVariant variant = ExplanationVariant::none;
    std::string text;
    std::vector<RelationTriple> supporting_relations; // empty for none/cb
    // attribute named in the text for the desired object, when present
    std::optional<std::string> attribute_mentioned;
};

// "the <subject label> <predicate surface> the <object label>"
std::string render_relation(const RelationTriple& triple, const PhraseLexicon& lexicon,
                            const SceneGraph& graph);
// "the <label> <attribute surface>"
std::string render_attribute(const SceneNode& node, const PhraseLexicon& lexicon);

// "A", "A and B", "A, B and C"
std::string join_phrases(std::span<const std::string> phrases);

Explanation generate_none(const FailureScenario& scenario);
Explanation generate_cb(const FailureScenario& scenario);
Explanation generate_ssg(const SceneGraph& graph, NodeId desired_object,
                         const PhraseLexicon& lexicon);
Explanation generate_ssg_r(const SceneGraph& graph, NodeId desired_object,
                           const PairwiseVoter& ranker, const PhraseLexicon& lexicon,
                           PairIteration iteration = PairIteration::unordered);

OrderedJson explanation_to_json(const Explanation& e); // {variant, text, supporting_relations}

} // namespace pickwhy
