#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pickwhy/errors.hpp"

namespace pickwhy {

using NodeId = int;

// Axis-aligned pixel box: (x, y) is the top-left corner.
struct BoundingBox2D {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }

    bool operator==(const BoundingBox2D&) const = default;
};

// Valid boxes have positive extent and finite, non-negative coordinates.
bool bbox_valid(const BoundingBox2D& b);
double bbox_iou(const BoundingBox2D& a, const BoundingBox2D& b);
bool bbox_contains(const BoundingBox2D& outer, const BoundingBox2D& inner);

// Ordered set of unique names; the position of a name defines its one-hot
// encoding index, so order is part of the contract.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const { return names_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr const char* kNoAttribute = "none";

Vocabulary default_predicates(); // {on, in, underneath, near, close_to, inside}
Vocabulary default_attributes(); // {none, fragile, heavy, hot}

struct SceneNode {
    NodeId id = 0;
    BoundingBox2D bbox;
    std::string label;
    std::string attribute = kNoAttribute;

    bool operator==(const SceneNode&) const = default;
};

struct RelationTriple {
    NodeId subject = 0;
    std::string predicate;
    NodeId object = 0;

    auto operator<=>(const RelationTriple&) const = default;
};

// Directed scene graph. Triples keep insertion order; all listing and
// explanation output follows that order.
struct SceneGraph {
    Vocabulary predicates;
    Vocabulary attributes;
    std::vector<SceneNode> nodes;
    std::vector<RelationTriple> triples;

    const SceneNode* find_node(NodeId id) const;
    // Throws ValidationError("unknown_node") when absent.
    const SceneNode& node(NodeId id) const;

    bool operator==(const SceneGraph&) const = default;
};

enum class CauseKind { spatial, attribute };

// Why a pick fails: either a relation in the graph (spatial) or a non-`none`
// attribute on a node.
struct FailureCause {
    CauseKind kind = CauseKind::spatial;
    RelationTriple triple;    // set for spatial causes
    NodeId node = -1;         // set for attribute causes
    std::string attribute;    // set for attribute causes

    static FailureCause spatial(RelationTriple t);
    static FailureCause attr(NodeId node, std::string attribute);

    auto operator<=>(const FailureCause&) const = default;
};

enum class FailureType { single_spatial, compound_spatial, attribute };

std::string to_string(FailureType t);
FailureType failure_type_from_string(std::string_view s);
std::string to_string(CauseKind k);
CauseKind cause_kind_from_string(std::string_view s);

struct FailureScenario {
    SceneGraph graph;
    NodeId desired_object = 0;
    std::vector<FailureCause> causes; // non-empty, duplicate-free, stable order
    FailureType failure_type = FailureType::single_spatial;

    bool operator==(const FailureScenario&) const = default;
};

// Empty report iff every SceneGraph invariant holds. Violations are data,
// not errors; each one names the offending node or triple.
std::vector<std::string> validate_graph(const SceneGraph& graph);

// All triples where node_id appears as subject or object, in graph order.
// Throws ValidationError("unknown_node") for ids not in the graph.
std::vector<RelationTriple> triples_containing(const SceneGraph& graph, NodeId node_id);

// Total classification of a cause set. Any attribute cause makes the
// scenario an attribute failure; otherwise the spatial cause count decides.
// Throws ValidationError("empty_causes") on an empty set.
FailureType classify_failure_type(std::span<const FailureCause> causes);

// Graph checks plus scenario-level invariants (desired object present,
// causes grounded, stored type matches the cause set).
std::vector<std::string> validate_scenario(const FailureScenario& scenario);

} // namespace pickwhy
