#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "pickwhy/rng.hpp"
#include "pickwhy/synthetic_scenes.hpp"

using namespace pickwhy;

namespace {

PlacedObject make_object(NodeId id, const std::string& label, Footprint fp, double height,
                         SupportKind support = SupportKind::table, NodeId support_id = -1) {
    PlacedObject o;
    o.id = id;
    o.label = label;
    o.footprint = fp;
    o.height = height;
    o.support = support;
    o.support_id = support_id;
    return o;
}

bool has_triple(const std::vector<RelationTriple>& triples, NodeId s, const char* p,
                NodeId o) {
    return std::find(triples.begin(), triples.end(), RelationTriple{s, p, o}) !=
           triples.end();
}

} // namespace

TEST_CASE("stacking derives on and its underneath converse") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    objects.push_back(make_object(0, "credit card", {40, 40, 5, 3.5}, 0.3));
    objects.push_back(
        make_object(1, "newspaper", {35, 37, 18, 12}, 0.5, SupportKind::on, 0));
    const auto triples = derive_predicates(objects, config);
    CHECK(has_triple(triples, 1, "on", 0));
    CHECK(has_triple(triples, 0, "underneath", 1));
    CHECK(triples.size() == 2);
}

TEST_CASE("pairs beyond near_threshold derive nothing") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    objects.push_back(make_object(0, "mug", {0, 0, 4, 4}, 4.0));
    objects.push_back(make_object(1, "bowl", {60, 60, 8, 8}, 4.0));
    CHECK(derive_predicates(objects, config).empty());
}

TEST_CASE("threshold boundaries are inclusive and close_to wins over near") {
    GeneratorConfig config; // close 10, near 24
    std::vector<PlacedObject> objects;
    objects.push_back(make_object(0, "mug", {0, 0, 4, 4}, 4.0));     // center (2,2)
    objects.push_back(make_object(1, "bowl", {10, 0, 4, 4}, 4.0));   // center (12,2) -> d=10
    auto triples = derive_predicates(objects, config);
    CHECK(has_triple(triples, 0, "close_to", 1));
    CHECK(has_triple(triples, 1, "close_to", 0));

    objects[1].footprint.x = 24.0; // center (26,2) -> d=24 == near threshold
    triples = derive_predicates(objects, config);
    CHECK(has_triple(triples, 0, "near", 1));
    CHECK(has_triple(triples, 1, "near", 0));
}

TEST_CASE("containment derives in, and nesting derives inside") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    auto box = make_object(0, "box", {20, 20, 16, 16}, 8.0);
    box.is_container = true;
    box.container_open = false;
    objects.push_back(box);
    auto basket = make_object(1, "basket", {22, 22, 10, 10}, 6.0, SupportKind::in, 0);
    basket.is_container = true;
    basket.container_open = false;
    objects.push_back(basket);
    objects.push_back(make_object(2, "keys", {24, 24, 3, 3}, 0.6, SupportKind::in, 1));

    const auto triples = derive_predicates(objects, config);
    CHECK(has_triple(triples, 1, "in", 0));
    CHECK(has_triple(triples, 2, "in", 1));
    CHECK(has_triple(triples, 2, "inside", 0));
    CHECK_FALSE(has_triple(triples, 2, "in", 0));
}

TEST_CASE("each ordered pair derives at most one predicate") {
    GeneratorConfig config;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto scene = generate_scene(config, seed);
        std::set<std::pair<NodeId, NodeId>> seen;
        for (const auto& t : scene.scenario.graph.triples) {
            CHECK(seen.insert({t.subject, t.object}).second);
        }
    }
}

TEST_CASE("on and underneath are converses on generated scenes") {
    GeneratorConfig config;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto scene = generate_scene(config, seed);
        const auto& triples = scene.scenario.graph.triples;
        for (const auto& t : triples) {
            if (t.predicate == "on") {
                CHECK(has_triple(triples, t.object, "underneath", t.subject));
            }
            if (t.predicate == "underneath") {
                CHECK(has_triple(triples, t.object, "on", t.subject));
            }
        }
    }
}

TEST_CASE("failure causes: occlusion") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    objects.push_back(make_object(0, "credit card", {40, 40, 5, 3.5}, 0.3));
    objects.push_back(make_object(1, "newspaper", {35, 37, 18, 12}, 0.5, SupportKind::on, 0));
    const auto triples = derive_predicates(objects, config);
    const auto causes = derive_failure_causes(objects, triples, 0, config);
    REQUIRE(causes.size() == 1);
    CHECK(causes[0].kind == CauseKind::spatial);
    CHECK(causes[0].triple == RelationTriple{0, "underneath", 1});
}

TEST_CASE("failure causes: fragile attribute") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    auto vase = make_object(0, "vase", {40, 40, 6, 6}, 10.0);
    vase.attribute = "fragile";
    objects.push_back(vase);
    objects.push_back(make_object(1, "mug", {50, 40, 5, 5}, 4.0));
    const auto triples = derive_predicates(objects, config);
    const auto causes = derive_failure_causes(objects, triples, 0, config);
    REQUIRE(causes.size() == 1);
    CHECK(causes[0].kind == CauseKind::attribute);
    CHECK(causes[0].attribute == "fragile");
}

TEST_CASE("failure causes: occluded and boxed is compound") {
    GeneratorConfig config;
    std::vector<PlacedObject> objects;
    auto box = make_object(0, "box", {20, 20, 16, 16}, 8.0);
    box.is_container = true;
    box.container_open = false;
    objects.push_back(box);
    objects.push_back(make_object(1, "mug", {24, 24, 4, 4}, 4.0, SupportKind::in, 0));
    objects.push_back(
        make_object(2, "cutting board", {22, 22, 12, 12}, 1.0, SupportKind::on, 1));
    const auto triples = derive_predicates(objects, config);
    const auto causes = derive_failure_causes(objects, triples, 1, config);

    // independent rule evaluation: scan the triples with the documented rules
    std::vector<FailureCause> expected;
    for (const auto& t : triples) {
        if (t.subject != 1) continue;
        if (t.predicate == "underneath") expected.push_back(FailureCause::spatial(t));
        if ((t.predicate == "in" || t.predicate == "inside")) {
            for (const auto& o : objects) {
                if (o.id == t.object && o.is_container && !o.container_open) {
                    expected.push_back(FailureCause::spatial(t));
                }
            }
        }
    }
    REQUIRE(expected.size() == 2);
    CHECK(causes == expected);
    CHECK(classify_failure_type(causes) == FailureType::compound_spatial);

    // open the box: only the occlusion remains
    objects[0].container_open = true;
    const auto relaxed = derive_failure_causes(objects, triples, 1, config);
    REQUIRE(relaxed.size() == 1);
    CHECK(relaxed[0].triple.predicate == "underneath");
}

TEST_CASE("project_bbox applies the exact affine map at zero jitter") {
    PlacedObject o = make_object(0, "box", {0, 0, 10, 10}, 5.0);
    CameraModel unit{1.0, 1.0, 1.0, 0.0};
    const auto b = project_bbox(o, unit, 42);
    CHECK(b.x == doctest::Approx(0.0));
    CHECK(b.y == doctest::Approx(0.0));
    CHECK(b.w == doctest::Approx(10.0));
    CHECK(b.h == doctest::Approx(15.0)); // depth 10 + height 5 * height_scale 1

    o.footprint = {3.0, 7.0, 4.0, 2.0};
    const auto b2 = project_bbox(o, CameraModel{6.0, 5.0, 2.0, 0.0}, 7);
    CHECK(b2.x == doctest::Approx(18.0));
    CHECK(b2.y == doctest::Approx(35.0));
    CHECK(b2.w == doctest::Approx(24.0));
    CHECK(b2.h == doctest::Approx(20.0)); // 2*5 + 5*2
}

TEST_CASE("project_bbox is deterministic per seed") {
    const PlacedObject o = make_object(0, "box", {10, 20, 8, 6}, 8.0);
    const CameraModel camera; // default jitter 0.05
    CHECK(project_bbox(o, camera, 99) == project_bbox(o, camera, 99));
    CHECK(project_bbox(o, camera, 99) != project_bbox(o, camera, 100));
}

TEST_CASE("jitter keeps every dimension within 5 percent") {
    const PlacedObject o = make_object(0, "box", {10, 20, 8, 6}, 8.0);
    CameraModel camera;
    camera.jitter = 0.05;
    CameraModel flat = camera;
    flat.jitter = 0.0;
    const auto base = project_bbox(o, flat, 0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto b = project_bbox(o, camera, seed);
        CHECK(std::abs(b.x - base.x) <= 0.05 * base.x + 1e-12);
        CHECK(std::abs(b.y - base.y) <= 0.05 * base.y + 1e-12);
        CHECK(std::abs(b.w - base.w) <= 0.05 * base.w + 1e-12);
        CHECK(std::abs(b.h - base.h) <= 0.05 * base.h + 1e-12);
    }
}

TEST_CASE("generated scenes satisfy the configured constraints") {
    GeneratorConfig config;
    const auto scene = generate_scene(config, 0);
    const int n = static_cast<int>(scene.scenario.graph.nodes.size());
    CHECK(n >= config.object_count_range[0]);
    CHECK(n <= config.object_count_range[1]);
    const int relations = static_cast<int>(scene.scenario.graph.triples.size());
    CHECK(relations >= config.relation_target_range[0]);
    CHECK(relations <= config.relation_target_range[1]);
    CHECK_FALSE(scene.scenario.causes.empty());
    CHECK(validate_scenario(scene.scenario).empty());
}

TEST_CASE("generation is byte-deterministic per seed") {
    GeneratorConfig config;
    const auto a = generate_scene(config, 7);
    const auto b = generate_scene(config, 7);
    CHECK(dump_json(scene_to_json(a.scenario)) == dump_json(scene_to_json(b.scenario)));
    CHECK(a.objects == b.objects);
}

TEST_CASE("mean object count over 100 seeds brackets 13") {
    GeneratorConfig config;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        total += static_cast<double>(generate_scene(config, seed).scenario.graph.nodes.size());
    }
    const double mean = total / 100.0;
    CHECK(mean >= 11.0);
    CHECK(mean <= 15.0);
}

TEST_CASE("unreachable relation target raises a generation error") {
    GeneratorConfig config;
    config.relation_target_range = {10000, 10001};
    try {
        generate_scene(config, 1);
        FAIL("expected a generation error");
    } catch (const ValidationError& e) {
        CHECK(e.code() == "generation");
        CHECK(std::string(e.detail()).find("relation_target_range") != std::string::npos);
    }
}

TEST_CASE("split counts follow largest remainder with non-empty splits") {
    CHECK(split_counts(188) == std::array<std::size_t, 3>{124, 32, 32});
    CHECK(split_counts(3) == std::array<std::size_t, 3>{1, 1, 1});
    CHECK(split_counts(150) == std::array<std::size_t, 3>{99, 26, 25});
    for (std::size_t n = 3; n < 400; ++n) {
        const auto c = split_counts(n);
        CHECK(c[0] + c[1] + c[2] == n);
        CHECK(c[0] >= 1);
        CHECK(c[1] >= 1);
        CHECK(c[2] >= 1);
    }
}

TEST_CASE("corpus build, save and load round-trip byte-exactly") {
    GeneratorConfig config;
    const Corpus corpus = build_corpus(config, 6, 21);
    CHECK(corpus.scenes.size() == 6);
    CHECK(corpus.indices_of(Split::train).size() == split_counts(6)[0]);

    const auto path = std::filesystem::temp_directory_path() / "pickwhy_corpus_test.json";
    save_corpus(corpus, path);
    const Corpus loaded = load_corpus(path);
    CHECK(loaded == corpus);

    const auto path2 = std::filesystem::temp_directory_path() / "pickwhy_corpus_test2.json";
    save_corpus(loaded, path2);
    std::ifstream f1(path), f2(path2);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(bytes1 == bytes2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("corpus loader rejects version and schema problems") {
    GeneratorConfig config;
    const Corpus corpus = build_corpus(config, 3, 5);
    auto j = corpus_to_json(corpus);
    j["format_version"] = 2;
    CHECK_THROWS_AS(corpus_from_json(j), ValidationError);

    auto j2 = corpus_to_json(corpus);
    j2["config"]["mystery_knob"] = 1;
    try {
        corpus_from_json(j2);
        FAIL("expected a schema error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.detail()).find("mystery_knob") != std::string::npos);
    }

    auto j3 = corpus_to_json(corpus);
    j3["scenes"][1]["scene"].erase("failure");
    try {
        corpus_from_json(j3);
        FAIL("expected a schema error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.detail()).find("scenes[1]") != std::string::npos);
    }
}

TEST_CASE("config validation names bad settings") {
    GeneratorConfig config;
    config.close_threshold = 30.0; // >= near
    CHECK_THROWS_AS(validate_config(config), ValidationError);
    config = GeneratorConfig{};
    config.attribute_rate = 1.5;
    CHECK_THROWS_AS(validate_config(config), ValidationError);
    config = GeneratorConfig{};
    config.object_count_range = {5, 2};
    CHECK_THROWS_AS(validate_config(config), ValidationError);
}
