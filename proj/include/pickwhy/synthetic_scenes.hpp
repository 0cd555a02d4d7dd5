#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pickwhy/scene_json.hpp"
#include "pickwhy/scene_model.hpp"

namespace pickwhy {

// Scenes live in a 2.5-D world: rectangular footprints on a 100x100 table,
// a per-object height, and a support forest (table / on top of / inside).
// That is enough geometry to realize every predicate in the default
// vocabulary with an exact oracle.

inline constexpr double kTableSize = 100.0;

struct Footprint {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double d = 0.0;

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + d / 2.0; }

    bool operator==(const Footprint&) const = default;
};

double center_distance(const Footprint& a, const Footprint& b);
bool footprint_fits_inside(const Footprint& inner, const Footprint& outer);

enum class SupportKind { table, on, in };

struct PlacedObject {
    NodeId id = 0;
    std::string label;
    std::string attribute = kNoAttribute;
    Footprint footprint;
    double height = 1.0;
    SupportKind support = SupportKind::table;
    NodeId support_id = -1;      // meaningful for on/in
    bool is_container = false;
    bool container_open = true;  // meaningful for containers

    bool operator==(const PlacedObject&) const = default;
};

// Affine footprint-to-pixel map plus a seeded multiplicative jitter of at
// most `jitter` per dimension. The unjittered map is
//   (x, y, w, h) = (fx*scale_x, fy*scale_y, fw*scale_x, fd*scale_y + height*height_scale).
struct CameraModel {
    double scale_x = 6.0;
    double scale_y = 6.0;
    double height_scale = 3.0;
    double jitter = 0.05;

    bool operator==(const CameraModel&) const = default;
};

struct FailureWeights {
    double single_spatial = 0.4;
    double compound_spatial = 0.3;
    double attribute = 0.3;

    bool operator==(const FailureWeights&) const = default;
};

struct GeneratorConfig {
    std::array<int, 2> object_count_range{8, 18};
    std::array<int, 2> relation_target_range{20, 40};
    double attribute_rate = 0.4;
    double near_threshold = 24.0;
    double close_threshold = 10.0;
    std::uint64_t rng_seed = 0;
    FailureWeights failure_weights;
    double container_open_rate = 0.5;
    CameraModel camera;

    bool operator==(const GeneratorConfig&) const = default;
};

void validate_config(const GeneratorConfig& config); // throws ValidationError

// Ground-truth predicates from geometry. At most one predicate per ordered
// pair, decided in this order: on, in, underneath, inside (transitive
// containment), close_to (center distance <= close_threshold, inclusive),
// near (<= near_threshold, inclusive).
std::vector<RelationTriple> derive_predicates(std::span<const PlacedObject> objects,
                                              const GeneratorConfig& config);

// Ground-truth failure causes for `desired_object`:
//   - every <d, underneath, x> triple (occlusion),
//   - every <d, in|inside, c> triple with c closed (containment),
//   - an attribute cause when the object's attribute is not `none`.
// May be empty (the object is pickable).
std::vector<FailureCause> derive_failure_causes(std::span<const PlacedObject> objects,
                                                std::span<const RelationTriple> triples,
                                                NodeId desired_object,
                                                const GeneratorConfig& config);

BoundingBox2D project_bbox(const PlacedObject& object, const CameraModel& camera,
                           std::uint64_t seed);

struct GeneratedScene {
    std::vector<PlacedObject> objects;
    FailureScenario scenario;
};

// Deterministic per (config, seed). Throws ValidationError("generation")
// naming the first unsatisfiable constraint after bounded retries.
GeneratedScene generate_scene(const GeneratorConfig& config, std::uint64_t seed);

enum class Split { train, validation, test };

std::string to_string(Split s);
Split split_from_string(std::string_view s);

// 66/17/17 by largest remainder; when n >= 3 every split is topped up to at
// least one scene from the largest split.
std::array<std::size_t, 3> split_counts(std::size_t n_scenes);

struct Corpus {
    GeneratorConfig config;
    std::vector<FailureScenario> scenes;
    std::vector<Split> splits; // parallel to scenes

    std::vector<std::size_t> indices_of(Split split) const;

    bool operator==(const Corpus&) const = default;
};

Corpus build_corpus(const GeneratorConfig& config, std::size_t n_scenes, std::uint64_t seed);

// Corpus file: {"format_version": 1, "config": {...},
//               "scenes": [{"split": "...", "scene": <scene JSON>}, ...]}
OrderedJson corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const OrderedJson& j);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

OrderedJson generator_config_to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const OrderedJson& j);

} // namespace pickwhy
