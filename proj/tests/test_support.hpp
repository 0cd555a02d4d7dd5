#pragma once

// Shared fixtures for the test suites.

#include <string>
#include <vector>

#include "pickwhy/scene_model.hpp"

namespace pickwhy::testing {

inline SceneNode make_node(NodeId id, std::string label, std::string attribute,
                           double x, double y, double w, double h) {
    SceneNode n;
    n.id = id;
    n.label = std::move(label);
    n.attribute = std::move(attribute);
    n.bbox = BoundingBox2D{x, y, w, h};
    return n;
}

// The credit-card scene: a card underneath a newspaper, a mug nearby.
inline FailureScenario card_scene() {
    SceneGraph g;
    g.predicates = default_predicates();
    g.attributes = default_attributes();
    g.nodes.push_back(make_node(0, "credit card", kNoAttribute, 40.0, 42.0, 30.0, 22.0));
    g.nodes.push_back(make_node(1, "newspaper", kNoAttribute, 30.0, 30.0, 110.0, 80.0));
    g.nodes.push_back(make_node(2, "mug", kNoAttribute, 160.0, 40.0, 30.0, 42.0));
    g.triples.push_back({0, "underneath", 1});
    g.triples.push_back({0, "near", 2});

    FailureScenario s;
    s.graph = std::move(g);
    s.desired_object = 0;
    s.causes.push_back(FailureCause::spatial({0, "underneath", 1}));
    s.failure_type = FailureType::single_spatial;
    return s;
}

// A fragile vase close to a bowl; the attribute is the only cause.
inline FailureScenario vase_scene() {
    SceneGraph g;
    g.predicates = default_predicates();
    g.attributes = default_attributes();
    g.nodes.push_back(make_node(0, "vase", "fragile", 50.0, 20.0, 40.0, 90.0));
    g.nodes.push_back(make_node(1, "bowl", kNoAttribute, 100.0, 60.0, 50.0, 40.0));
    g.triples.push_back({0, "close_to", 1});
    g.triples.push_back({1, "close_to", 0});

    FailureScenario s;
    s.graph = std::move(g);
    s.desired_object = 0;
    s.causes.push_back(FailureCause::attr(0, "fragile"));
    s.failure_type = FailureType::attribute;
    return s;
}

} // namespace pickwhy::testing
