#include "pickwhy/scene_json.hpp"

#include <fstream>
#include <sstream>

namespace pickwhy {

namespace {

// Schema errors must name where they happened.
[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
    throw ValidationError("scene_schema", where + ": " + what);
}

const OrderedJson& require(const OrderedJson& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        schema_error(where, std::string("missing field `") + key + "`");
    }
    return j.at(key);
}

std::string str_field(const OrderedJson& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_string()) schema_error(where + "." + key, "expected a string");
    return v.get<std::string>();
}

Vocabulary vocab_field(const OrderedJson& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_array()) schema_error(where + "." + key, "expected an array of names");
    std::vector<std::string> names;
    for (const auto& n : v) {
        if (!n.is_string()) schema_error(where + "." + key, "expected string entries");
        names.push_back(n.get<std::string>());
    }
    return Vocabulary(std::move(names));
}

RelationTriple triple_from_json(const OrderedJson& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number_integer() ||
        !j[1].is_string() || !j[2].is_number_integer()) {
        schema_error(where, "expected [subject_id, \"predicate\", object_id]");
    }
    return RelationTriple{j[0].get<NodeId>(), j[1].get<std::string>(), j[2].get<NodeId>()};
}

OrderedJson triple_to_json(const RelationTriple& t) {
    return OrderedJson::array({t.subject, t.predicate, t.object});
}

} // namespace

OrderedJson cause_to_json(const FailureCause& cause) {
    OrderedJson j;
    j["kind"] = to_string(cause.kind);
    if (cause.kind == CauseKind::spatial) {
        j["triple"] = triple_to_json(cause.triple);
    } else {
        j["node"] = cause.node;
        j["attribute"] = cause.attribute;
    }
    return j;
}

FailureCause cause_from_json(const OrderedJson& j) {
    const std::string where = "failure.causes[]";
    const CauseKind kind = cause_kind_from_string(str_field(j, "kind", where));
    if (kind == CauseKind::spatial) {
        return FailureCause::spatial(triple_from_json(require(j, "triple", where), where));
    }
    const auto& node = require(j, "node", where);
    if (!node.is_number_integer()) schema_error(where + ".node", "expected an integer id");
    return FailureCause::attr(node.get<NodeId>(), str_field(j, "attribute", where));
}

namespace {

OrderedJson graph_to_json_impl(const SceneGraph& graph) {
    OrderedJson j;
    j["vocab"] = {{"predicates", graph.predicates.names()},
                  {"attributes", graph.attributes.names()}};
    OrderedJson nodes = OrderedJson::array();
    for (const auto& n : graph.nodes) {
        OrderedJson nj;
        nj["id"] = n.id;
        nj["label"] = n.label;
        nj["attribute"] = n.attribute;
        nj["bbox"] = OrderedJson::array({n.bbox.x, n.bbox.y, n.bbox.w, n.bbox.h});
        nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    OrderedJson triples = OrderedJson::array();
    for (const auto& t : graph.triples) triples.push_back(triple_to_json(t));
    j["triples"] = std::move(triples);
    return j;
}

} // namespace

OrderedJson scene_to_json(const SceneGraph& graph) { return graph_to_json_impl(graph); }

OrderedJson scene_to_json(const FailureScenario& scenario) {
    OrderedJson j = graph_to_json_impl(scenario.graph);
    OrderedJson f;
    f["desired_object"] = scenario.desired_object;
    OrderedJson causes = OrderedJson::array();
    for (const auto& c : scenario.causes) causes.push_back(cause_to_json(c));
    f["causes"] = std::move(causes);
    f["type"] = to_string(scenario.failure_type);
    j["failure"] = std::move(f);
    return j;
}

LoadedScene scene_from_json(const OrderedJson& j) {
    if (!j.is_object()) schema_error("scene", "expected a JSON object");
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        if (key != "vocab" && key != "nodes" && key != "triples" && key != "failure") {
            schema_error("scene", "unknown field `" + key + "`");
        }
    }

    LoadedScene out;
    const auto& vocab = require(j, "vocab", "scene");
    out.graph.predicates = vocab_field(vocab, "predicates", "scene.vocab");
    out.graph.attributes = vocab_field(vocab, "attributes", "scene.vocab");

    const auto& nodes = require(j, "nodes", "scene");
    if (!nodes.is_array()) schema_error("scene.nodes", "expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "scene.nodes[" + std::to_string(i) + "]";
        const auto& nj = nodes[i];
        SceneNode n;
        const auto& id = require(nj, "id", where);
        if (!id.is_number_integer()) schema_error(where + ".id", "expected an integer");
        n.id = id.get<NodeId>();
        n.label = str_field(nj, "label", where);
        n.attribute = str_field(nj, "attribute", where);
        const auto& bbox = require(nj, "bbox", where);
        if (!bbox.is_array() || bbox.size() != 4) {
            schema_error(where + ".bbox", "expected [x, y, w, h]");
        }
        for (const auto& v : bbox) {
            if (!v.is_number()) schema_error(where + ".bbox", "expected numbers");
        }
        n.bbox = BoundingBox2D{bbox[0].get<double>(), bbox[1].get<double>(),
                               bbox[2].get<double>(), bbox[3].get<double>()};
        out.graph.nodes.push_back(std::move(n));
    }

    const auto& triples = require(j, "triples", "scene");
    if (!triples.is_array()) schema_error("scene.triples", "expected an array");
    for (std::size_t i = 0; i < triples.size(); ++i) {
        out.graph.triples.push_back(
            triple_from_json(triples[i], "scene.triples[" + std::to_string(i) + "]"));
    }

    auto violations = validate_graph(out.graph);
    if (!violations.empty()) {
        schema_error("scene", violations.front());
    }

    if (j.contains("failure")) {
        const auto& f = j.at("failure");
        FailureScenario s;
        s.graph = out.graph;
        const auto& d = require(f, "desired_object", "scene.failure");
        if (!d.is_number_integer()) {
            schema_error("scene.failure.desired_object", "expected an integer id");
        }
        s.desired_object = d.get<NodeId>();
        const auto& causes = require(f, "causes", "scene.failure");
        if (!causes.is_array()) schema_error("scene.failure.causes", "expected an array");
        for (const auto& c : causes) s.causes.push_back(cause_from_json(c));
        s.failure_type = failure_type_from_string(str_field(f, "type", "scene.failure"));
        auto scenario_violations = validate_scenario(s);
        if (!scenario_violations.empty()) {
            schema_error("scene.failure", scenario_violations.front());
        }
        out.scenario = std::move(s);
    }
    return out;
}

std::string dump_json(const OrderedJson& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::filesystem::path& path, const OrderedJson& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_failed", "cannot open " + path.string() + " for writing");
    f << dump_json(j);
    if (!f) throw IoError("write_failed", "error while writing " + path.string());
}

OrderedJson read_json_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_failed", "cannot open " + path.string());
    try {
        return OrderedJson::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("json_parse", path.string() + ": " + e.what());
    }
}

LoadedScene load_scene_file(const std::filesystem::path& path) {
    return scene_from_json(read_json_file(path));
}

void save_scene_file(const std::filesystem::path& path, const FailureScenario& scenario) {
    write_json_file(path, scene_to_json(scenario));
}

void check_format_version(const OrderedJson& j, int expected, const std::string& what) {
    if (!j.is_object() || !j.contains("format_version") ||
        !j.at("format_version").is_number_integer()) {
        throw ValidationError("format_version", what + ": missing format_version");
    }
    const int got = j.at("format_version").get<int>();
    if (got != expected) {
        throw ValidationError("format_version",
                              what + ": expected version " + std::to_string(expected) +
                                  ", found " + std::to_string(got));
    }
}

} // namespace pickwhy
