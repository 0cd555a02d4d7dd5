#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "pickwhy/scene_model.hpp"

namespace pickwhy {

// Scene file schema (field order is part of the format):
//   {
//     "vocab":   {"predicates": [...], "attributes": [...]},
//     "nodes":   [{"id", "label", "attribute", "bbox": [x, y, w, h]}, ...],
//     "triples": [[subject_id, "predicate", object_id], ...],
//     "failure": {"desired_object", "causes": [...], "type"}   // optional
//   }
// Causes: {"kind": "spatial", "triple": [s, "p", o]} or
//         {"kind": "attribute", "node": id, "attribute": "name"}.

using OrderedJson = nlohmann::ordered_json;

struct LoadedScene {
    SceneGraph graph;
    std::optional<FailureScenario> scenario; // present iff the file has a failure block
};

OrderedJson scene_to_json(const SceneGraph& graph);
OrderedJson scene_to_json(const FailureScenario& scenario);
LoadedScene scene_from_json(const OrderedJson& j);

OrderedJson cause_to_json(const FailureCause& cause);
FailureCause cause_from_json(const OrderedJson& j);

// File helpers shared by every artifact writer/reader. Writing is atomic in
// content: two saves of equal values produce identical bytes.
std::string dump_json(const OrderedJson& j);
void write_json_file(const std::filesystem::path& path, const OrderedJson& j);
OrderedJson read_json_file(const std::filesystem::path& path);

LoadedScene load_scene_file(const std::filesystem::path& path);
void save_scene_file(const std::filesystem::path& path, const FailureScenario& scenario);

// Rejects artifacts whose "format_version" does not match `expected`.
void check_format_version(const OrderedJson& j, int expected, const std::string& what);

} // namespace pickwhy
