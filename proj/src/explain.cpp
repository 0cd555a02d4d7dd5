#include "pickwhy/explain.hpp"

namespace pickwhy {

std::string to_string(ExplanationVariant v) {
    switch (v) {
        case ExplanationVariant::none: return "none";
        case ExplanationVariant::cb: return "cb";
        case ExplanationVariant::ssg: return "ssg";
        case ExplanationVariant::ssg_r: return "ssg_r";
    }
    throw ValidationError("bad_variant", "unrepresentable enum value");
}

ExplanationVariant explanation_variant_from_string(std::string_view s) {
    if (s == "none") return ExplanationVariant::none;
    if (s == "cb") return ExplanationVariant::cb;
    if (s == "ssg") return ExplanationVariant::ssg;
    if (s == "ssg_r" || s == "ssg-r") return ExplanationVariant::ssg_r;
    throw ValidationError("bad_variant", std::string(s));
}

PhraseLexicon PhraseLexicon::defaults() {
    PhraseLexicon lex;
    lex.predicate_surface = {
        {"on", "is on"},           {"in", "is in"},
        {"underneath", "is underneath"}, {"near", "is near"},
        {"close_to", "is close to"},     {"inside", "is inside"},
    };
    lex.attribute_surface = {
        {"fragile", "is fragile"},
        {"heavy", "is heavy"},
        {"hot", "is hot"},
    };
    return lex;
}

namespace {

const std::string& surface(const std::map<std::string, std::string>& table,
                           const std::string& key, const char* what) {
    auto it = table.find(key);
    if (it == table.end()) {
        throw ValidationError("missing_surface_form",
                              std::string(what) + " `" + key + "` has no phrase template");
    }
    return it->second;
}

std::string template_head(const std::string& article, const std::string& label) {
    return "The robot could not pick up " + article + " " + label;
}

} // namespace

std::string render_relation(const RelationTriple& triple, const PhraseLexicon& lexicon,
                            const SceneGraph& graph) {
    const SceneNode& subject = graph.node(triple.subject);
    const SceneNode& object = graph.node(triple.object);
    return lexicon.article + " " + subject.label + " " +
           surface(lexicon.predicate_surface, triple.predicate, "predicate") + " " +
           lexicon.article + " " + object.label;
}

std::string render_attribute(const SceneNode& node, const PhraseLexicon& lexicon) {
    return lexicon.article + " " + node.label + " " +
           surface(lexicon.attribute_surface, node.attribute, "attribute");
}

std::string join_phrases(std::span<const std::string> phrases) {
    if (phrases.empty()) return "";
    std::string out = phrases.front();
    for (std::size_t i = 1; i < phrases.size(); ++i) {
        out += (i + 1 == phrases.size()) ? " and " : ", ";
        out += phrases[i];
    }
    return out;
}

Explanation generate_none(const FailureScenario&) {
    Explanation e;
    e.variant = ExplanationVariant::none;
    return e;
}

Explanation generate_cb(const FailureScenario& scenario) {
    Explanation e;
    e.variant = ExplanationVariant::cb;
    const SceneNode& d = scenario.graph.node(scenario.desired_object);

    // Only the first spatial cause is phrased, and only coarsely; attribute
    // causes are not expressible at all.
    std::string phrase;
    for (const auto& c : scenario.causes) {
        if (c.kind != CauseKind::spatial) continue;
        if (c.triple.predicate == "underneath") {
            phrase = "the " + d.label + " is occluded";
        } else {
            phrase = "the " + d.label + " is in a closed container";
        }
        break;
    }
    if (phrase.empty()) {
        phrase = "the " + d.label + " cannot be picked";
    }
    e.text = template_head("the", d.label) + " because " + phrase + ".";
    return e;
}

Explanation generate_ssg(const SceneGraph& graph, NodeId desired_object,
                         const PhraseLexicon& lexicon) {
    const SceneNode& d = graph.node(desired_object);
    Explanation e;
    e.variant = ExplanationVariant::ssg;
    e.supporting_relations = triples_containing(graph, desired_object);

    std::vector<std::string> phrases;
    for (const auto& t : e.supporting_relations) {
        phrases.push_back(render_relation(t, lexicon, graph));
    }
    if (d.attribute != kNoAttribute) {
        phrases.push_back(render_attribute(d, lexicon));
        e.attribute_mentioned = d.attribute;
    }
    if (phrases.empty()) {
        e.text = template_head(lexicon.article, d.label) + ".";
    } else {
        e.text = template_head(lexicon.article, d.label) + " because " +
                 join_phrases(phrases) + ".";
    }
    return e;
}

Explanation generate_ssg_r(const SceneGraph& graph, NodeId desired_object,
                           const PairwiseVoter& ranker, const PhraseLexicon& lexicon,
                           PairIteration iteration) {
    const SceneNode& d = graph.node(desired_object);
    Explanation e;
    e.variant = ExplanationVariant::ssg_r;

    const auto subgraph = triples_containing(graph, desired_object);
    if (!subgraph.empty()) {
        const auto ranked = pairwise_rank(graph, subgraph, ranker, iteration);
        e.supporting_relations = top_ranked(ranked);
    }

    std::vector<std::string> phrases;
    for (const auto& t : e.supporting_relations) {
        phrases.push_back(render_relation(t, lexicon, graph));
    }
    if (d.attribute != kNoAttribute) {
        // the attribute grounds a cause under the labeler, so it stays
        phrases.push_back(render_attribute(d, lexicon));
        e.attribute_mentioned = d.attribute;
    }
    if (phrases.empty()) {
        e.text = template_head(lexicon.article, d.label) + ".";
    } else {
        e.text = template_head(lexicon.article, d.label) + " because " +
                 join_phrases(phrases) + ".";
    }
    return e;
}

OrderedJson explanation_to_json(const Explanation& e) {
    OrderedJson j;
    j["variant"] = to_string(e.variant);
    j["text"] = e.text;
    OrderedJson rels = OrderedJson::array();
    for (const auto& t : e.supporting_relations) {
        rels.push_back(OrderedJson::array({t.subject, t.predicate, t.object}));
    }
    j["supporting_relations"] = std::move(rels);
    return j;
}

} // namespace pickwhy
