#include "pickwhy/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace pickwhy {

bool bbox_valid(const BoundingBox2D& b) {
    return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) &&
           std::isfinite(b.h) && b.x >= 0.0 && b.y >= 0.0 && b.w > 0.0 && b.h > 0.0;
}

double bbox_iou(const BoundingBox2D& a, const BoundingBox2D& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

bool bbox_contains(const BoundingBox2D& outer, const BoundingBox2D& inner) {
    return inner.x >= outer.x && inner.y >= outer.y &&
           inner.x + inner.w <= outer.x + outer.w &&
           inner.y + inner.h <= outer.y + outer.h;
}

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) {
        throw ValidationError("empty_vocabulary", "a vocabulary needs at least one name");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) {
            throw ValidationError("duplicate_vocabulary_name", names_[i]);
        }
    }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Vocabulary default_predicates() {
    return Vocabulary({"on", "in", "underneath", "near", "close_to", "inside"});
}

Vocabulary default_attributes() {
    return Vocabulary({kNoAttribute, "fragile", "heavy", "hot"});
}

const SceneNode* SceneGraph::find_node(NodeId id) const {
    for (const auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

const SceneNode& SceneGraph::node(NodeId id) const {
    const SceneNode* n = find_node(id);
    if (n == nullptr) {
        throw ValidationError("unknown_node", "node id " + std::to_string(id) +
                                                  " is not in the graph");
    }
    return *n;
}

FailureCause FailureCause::spatial(RelationTriple t) {
    FailureCause c;
    c.kind = CauseKind::spatial;
    c.triple = std::move(t);
    return c;
}

FailureCause FailureCause::attr(NodeId node, std::string attribute) {
    FailureCause c;
    c.kind = CauseKind::attribute;
    c.node = node;
    c.attribute = std::move(attribute);
    return c;
}

std::string to_string(FailureType t) {
    switch (t) {
        case FailureType::single_spatial: return "single_spatial";
        case FailureType::compound_spatial: return "compound_spatial";
        case FailureType::attribute: return "attribute";
    }
    throw ValidationError("bad_failure_type", "unrepresentable enum value");
}

FailureType failure_type_from_string(std::string_view s) {
    if (s == "single_spatial") return FailureType::single_spatial;
    if (s == "compound_spatial") return FailureType::compound_spatial;
    if (s == "attribute") return FailureType::attribute;
    throw ValidationError("bad_failure_type", std::string(s));
}

std::string to_string(CauseKind k) {
    return k == CauseKind::spatial ? "spatial" : "attribute";
}

CauseKind cause_kind_from_string(std::string_view s) {
    if (s == "spatial") return CauseKind::spatial;
    if (s == "attribute") return CauseKind::attribute;
    throw ValidationError("bad_cause_kind", std::string(s));
}

std::vector<std::string> validate_graph(const SceneGraph& graph) {
    std::vector<std::string> report;
    auto note = [&report](const std::string& msg) { report.push_back(msg); };

    std::set<NodeId> ids;
    for (const auto& n : graph.nodes) {
        if (!ids.insert(n.id).second) {
            note("node " + std::to_string(n.id) + ": duplicate id");
        }
        if (n.id < 0) {
            note("node " + std::to_string(n.id) + ": negative id");
        }
        if (!bbox_valid(n.bbox)) {
            note("node " + std::to_string(n.id) + ": invalid bounding box");
        }
        if (!graph.attributes.contains(n.attribute)) {
            note("node " + std::to_string(n.id) + ": unknown attribute " + n.attribute);
        }
    }

    std::set<RelationTriple> seen;
    for (std::size_t i = 0; i < graph.triples.size(); ++i) {
        const auto& t = graph.triples[i];
        const std::string tag = "triple " + std::to_string(i) + ": ";
        if (t.subject == t.object) {
            note(tag + "subject equals object (" + std::to_string(t.subject) + ")");
        }
        if (ids.find(t.subject) == ids.end()) {
            note(tag + "unknown subject_id " + std::to_string(t.subject));
        }
        if (ids.find(t.object) == ids.end()) {
            note(tag + "unknown object_id " + std::to_string(t.object));
        }
        if (!graph.predicates.contains(t.predicate)) {
            note(tag + "unknown predicate " + t.predicate);
        }
        if (!seen.insert(t).second) {
            note(tag + "duplicate triple");
        }
    }
    return report;
}

std::vector<RelationTriple> triples_containing(const SceneGraph& graph, NodeId node_id) {
    if (graph.find_node(node_id) == nullptr) {
        throw ValidationError("unknown_node", "node id " + std::to_string(node_id) +
                                                  " is not in the graph");
    }
    std::vector<RelationTriple> out;
    for (const auto& t : graph.triples) {
        if (t.subject == node_id || t.object == node_id) out.push_back(t);
    }
    return out;
}

FailureType classify_failure_type(std::span<const FailureCause> causes) {
    if (causes.empty()) {
        throw ValidationError("empty_causes", "a failure scenario needs at least one cause");
    }
    std::size_t spatial = 0;
    std::size_t attribute = 0;
    for (const auto& c : causes) {
        (c.kind == CauseKind::spatial ? spatial : attribute)++;
    }
    if (attribute > 0) return FailureType::attribute;
    if (spatial >= 2) return FailureType::compound_spatial;
    return FailureType::single_spatial;
}

std::vector<std::string> validate_scenario(const FailureScenario& scenario) {
    std::vector<std::string> report = validate_graph(scenario.graph);
    if (scenario.graph.find_node(scenario.desired_object) == nullptr) {
        report.push_back("desired_object " + std::to_string(scenario.desired_object) +
                         " is not in the graph");
    }
    if (scenario.causes.empty()) {
        report.push_back("cause set is empty");
        return report;
    }

    std::set<RelationTriple> triples(scenario.graph.triples.begin(),
                                     scenario.graph.triples.end());
    for (std::size_t i = 0; i < scenario.causes.size(); ++i) {
        const auto& c = scenario.causes[i];
        const std::string tag = "cause " + std::to_string(i) + ": ";
        if (c.kind == CauseKind::spatial) {
            if (triples.find(c.triple) == triples.end()) {
                report.push_back(tag + "grounding triple is not in the graph");
            }
        } else {
            if (c.attribute == kNoAttribute) {
                report.push_back(tag + "attribute cause references `none`");
            }
            const SceneNode* n = scenario.graph.find_node(c.node);
            if (n == nullptr) {
                report.push_back(tag + "unknown node " + std::to_string(c.node));
            } else if (n->attribute != c.attribute) {
                report.push_back(tag + "node " + std::to_string(c.node) +
                                 " does not carry attribute " + c.attribute);
            }
        }
    }
    for (std::size_t i = 0; i < scenario.causes.size(); ++i) {
        for (std::size_t j = i + 1; j < scenario.causes.size(); ++j) {
            if (scenario.causes[i] == scenario.causes[j]) {
                report.push_back("cause " + std::to_string(j) + ": duplicate of cause " +
                                 std::to_string(i));
            }
        }
    }
    if (classify_failure_type(scenario.causes) != scenario.failure_type) {
        report.push_back("failure_type does not match the cause set");
    }
    return report;
}

} // namespace pickwhy
