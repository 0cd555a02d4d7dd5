#include "pickwhy/synthetic_scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <unordered_map>

#include "pickwhy/rng.hpp"

namespace pickwhy {

double center_distance(const Footprint& a, const Footprint& b) {
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    return std::sqrt(dx * dx + dy * dy);
}

bool footprint_fits_inside(const Footprint& inner, const Footprint& outer) {
    return inner.x >= outer.x && inner.y >= outer.y &&
           inner.x + inner.w <= outer.x + outer.w &&
           inner.y + inner.d <= outer.y + outer.d;
}

void validate_config(const GeneratorConfig& c) {
    auto fail = [](const std::string& what) {
        throw ValidationError("bad_config", what);
    };
    if (c.object_count_range[0] < 1 || c.object_count_range[0] > c.object_count_range[1]) {
        fail("object_count_range must be a non-empty range of positive counts");
    }
    if (c.relation_target_range[0] < 0 ||
        c.relation_target_range[0] > c.relation_target_range[1]) {
        fail("relation_target_range must be a non-empty range");
    }
    if (!(c.close_threshold > 0.0) || !(c.close_threshold < c.near_threshold)) {
        fail("thresholds must satisfy 0 < close_threshold < near_threshold");
    }
    if (c.attribute_rate < 0.0 || c.attribute_rate > 1.0) fail("attribute_rate outside [0, 1]");
    if (c.container_open_rate < 0.0 || c.container_open_rate > 1.0) {
        fail("container_open_rate outside [0, 1]");
    }
    const auto& w = c.failure_weights;
    if (w.single_spatial < 0.0 || w.compound_spatial < 0.0 || w.attribute < 0.0 ||
        w.single_spatial + w.compound_spatial + w.attribute <= 0.0) {
        fail("failure_weights must be non-negative and not all zero");
    }
    if (c.camera.scale_x <= 0.0 || c.camera.scale_y <= 0.0 || c.camera.height_scale < 0.0) {
        fail("camera scales must be positive");
    }
    if (c.camera.jitter < 0.0 || c.camera.jitter > 0.5) fail("camera jitter outside [0, 0.5]");
}

namespace {

const PlacedObject* find_object(std::span<const PlacedObject> objects, NodeId id) {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

// Containers an object sits in, transitively: every parent reached through
// an `in` edge while walking the support chain toward the table.
std::vector<NodeId> containers_of(std::span<const PlacedObject> objects,
                                  const PlacedObject& start) {
    std::vector<NodeId> out;
    const PlacedObject* cur = &start;
    std::size_t steps = 0;
    while (cur->support != SupportKind::table) {
        if (++steps > objects.size()) {
            throw ValidationError("bad_support", "support references form a cycle");
        }
        const PlacedObject* parent = find_object(objects, cur->support_id);
        if (parent == nullptr) {
            throw ValidationError("bad_support", "object " + std::to_string(cur->id) +
                                                     " is supported by unknown id " +
                                                     std::to_string(cur->support_id));
        }
        if (cur->support == SupportKind::in) out.push_back(parent->id);
        cur = parent;
    }
    return out;
}

} // namespace

std::vector<RelationTriple> derive_predicates(std::span<const PlacedObject> objects,
                                              const GeneratorConfig& config) {
    std::vector<RelationTriple> triples;
    for (const auto& a : objects) {
        const auto a_containers = containers_of(objects, a);
        for (const auto& b : objects) {
            if (a.id == b.id) continue;
            if (a.support == SupportKind::on && a.support_id == b.id) {
                triples.push_back({a.id, "on", b.id});
            } else if (a.support == SupportKind::in && a.support_id == b.id) {
                triples.push_back({a.id, "in", b.id});
            } else if (b.support == SupportKind::on && b.support_id == a.id) {
                triples.push_back({a.id, "underneath", b.id});
            } else if (std::find(a_containers.begin(), a_containers.end(), b.id) !=
                       a_containers.end()) {
                triples.push_back({a.id, "inside", b.id});
            } else {
                const double dist = center_distance(a.footprint, b.footprint);
                if (dist <= config.close_threshold) {
                    triples.push_back({a.id, "close_to", b.id});
                } else if (dist <= config.near_threshold) {
                    triples.push_back({a.id, "near", b.id});
                }
            }
        }
    }
    return triples;
}

std::vector<FailureCause> derive_failure_causes(std::span<const PlacedObject> objects,
                                                std::span<const RelationTriple> triples,
                                                NodeId desired_object,
                                                const GeneratorConfig& config) {
    (void)config; // occlusion/containment causes do not depend on thresholds
    const PlacedObject* d = find_object(objects, desired_object);
    if (d == nullptr) {
        throw ValidationError("unknown_node",
                              "desired object " + std::to_string(desired_object));
    }
    std::vector<FailureCause> causes;
    for (const auto& t : triples) {
        if (t.subject != desired_object) continue;
        if (t.predicate == "underneath") {
            causes.push_back(FailureCause::spatial(t));
        } else if (t.predicate == "in" || t.predicate == "inside") {
            const PlacedObject* c = find_object(objects, t.object);
            if (c != nullptr && c->is_container && !c->container_open) {
                causes.push_back(FailureCause::spatial(t));
            }
        }
    }
    if (d->attribute != kNoAttribute) {
        causes.push_back(FailureCause::attr(d->id, d->attribute));
    }
    return causes;
}

BoundingBox2D project_bbox(const PlacedObject& object, const CameraModel& camera,
                           std::uint64_t seed) {
    const Footprint& fp = object.footprint;
    if (!(fp.w > 0.0) || !(fp.d > 0.0)) {
        throw ValidationError("bad_footprint", "footprint must have positive extent");
    }
    Rng rng(seed);
    const double ux = rng.next_double(-1.0, 1.0);
    const double uy = rng.next_double(-1.0, 1.0);
    const double uw = rng.next_double(-1.0, 1.0);
    const double uh = rng.next_double(-1.0, 1.0);
    BoundingBox2D b;
    b.x = fp.x * camera.scale_x * (1.0 + camera.jitter * ux);
    b.y = fp.y * camera.scale_y * (1.0 + camera.jitter * uy);
    b.w = fp.w * camera.scale_x * (1.0 + camera.jitter * uw);
    b.h = (fp.d * camera.scale_y + object.height * camera.height_scale) *
          (1.0 + camera.jitter * uh);
    return b;
}

// ---------------------------------------------------------------------------
// Scene generation
// ---------------------------------------------------------------------------

namespace {

struct CatalogEntry {
    const char* label;
    double min_size;
    double max_size;
    double height;
    bool container;
    const char* affinity; // attribute this label tends to carry
};

constexpr CatalogEntry kCatalog[] = {
    {"credit card", 4.0, 6.0, 0.3, false, "none"},
    {"keys", 3.0, 4.5, 0.6, false, "none"},
    {"remote", 3.0, 6.0, 1.0, false, "none"},
    {"napkin", 6.0, 9.0, 0.3, false, "none"},
    {"newspaper", 16.0, 20.0, 0.5, false, "none"},
    {"cutting board", 12.0, 16.0, 1.0, false, "none"},
    {"bottle", 3.0, 5.0, 9.0, false, "none"},
    {"mug", 4.0, 6.0, 4.0, false, "hot"},
    {"pan", 10.0, 14.0, 3.0, false, "hot"},
    {"pot", 9.0, 12.0, 6.0, false, "hot"},
    {"vase", 5.0, 8.0, 10.0, false, "fragile"},
    {"plate", 10.0, 14.0, 1.0, false, "fragile"},
    {"bowl", 7.0, 10.0, 4.0, false, "fragile"},
    {"tablet", 9.0, 12.0, 0.8, false, "fragile"},
    {"book", 8.0, 12.0, 2.0, false, "heavy"},
    {"laptop", 13.0, 16.0, 1.5, false, "heavy"},
    {"box", 12.0, 18.0, 8.0, true, "heavy"},
    {"basket", 10.0, 16.0, 6.0, true, "none"},
};

constexpr std::size_t kCatalogSize = std::size(kCatalog);

// Labels small enough to be hidden or boxed up.
constexpr std::size_t kSmallPickables[] = {0, 1, 2, 3, 6, 7}; // card, keys, remote, napkin, bottle, mug
// Labels flat or broad enough to cover something else.
constexpr std::size_t kCoverers[] = {4, 5, 11, 13, 14, 15}; // newspaper, board, plate, tablet, book, laptop
// Non-container labels with a manipulation-relevant attribute.
constexpr std::size_t kAttributeCarriers[] = {7, 8, 9, 10, 11, 12, 13, 14, 15};
constexpr std::size_t kBoxIndex = 16;
constexpr std::size_t kBasketIndex = 17;

enum class FixtureKind { occlusion, containment, two_occluders, occluder_in_container, nested_containers, attribute_only };

struct DraftObject {
    std::size_t catalog = 0;
    std::string attribute = kNoAttribute;
    Footprint footprint;
    double height = 1.0;
    SupportKind support = SupportKind::table;
    int support_index = -1; // index into the draft vector
    bool container_open = true;
    bool container_flag_locked = false; // fixture containers keep their flag
};

struct Draft {
    std::vector<DraftObject> objects;
    int desired = -1;
};

double rand_size(Rng& rng, const CatalogEntry& e) {
    return rng.next_double(e.min_size, e.max_size);
}

// Place a table-level footprint, preferring positions that do not overlap
// other table-level footprints. `bias` trades clustering (more proximity
// relations) against spreading.
Footprint place_on_table(Rng& rng, double w, double d, double bias, double near_threshold,
                         const std::vector<Footprint>& table_level) {
    auto clamp_pos = [&](double x, double y) {
        return Footprint{std::clamp(x, 0.0, kTableSize - w),
                         std::clamp(y, 0.0, kTableSize - d), w, d};
    };
    auto overlaps = [&](const Footprint& f) {
        for (const auto& o : table_level) {
            const bool apart = f.x + f.w <= o.x || o.x + o.w <= f.x || f.y + f.d <= o.y ||
                               o.y + o.d <= f.y;
            if (!apart) return true;
        }
        return false;
    };

    Footprint candidate{};
    for (int attempt = 0; attempt < 40; ++attempt) {
        if (!table_level.empty() && rng.next_bool(bias)) {
            const auto& anchor = table_level[rng.next_index(table_level.size())];
            const double r = rng.next_double(4.0, 0.8 * near_threshold);
            const double theta = rng.next_double(0.0, 2.0 * std::numbers::pi);
            candidate = clamp_pos(anchor.cx() + r * std::cos(theta) - w / 2.0,
                                  anchor.cy() + r * std::sin(theta) - d / 2.0);
        } else {
            // best-of-4 spreading: keep the candidate farthest from everyone
            double best_score = -1.0;
            for (int k = 0; k < 4; ++k) {
                Footprint f = clamp_pos(rng.next_double(0.0, kTableSize - w),
                                        rng.next_double(0.0, kTableSize - d));
                double score = kTableSize * 2.0;
                for (const auto& o : table_level) {
                    score = std::min(score, center_distance(f, o));
                }
                if (score > best_score) {
                    best_score = score;
                    candidate = f;
                }
            }
        }
        if (!overlaps(candidate)) return candidate;
    }
    // solid objects never interpenetrate: sweep the table for a free spot
    for (double y = 0.0; y + d <= kTableSize; y += 4.0) {
        for (double x = 0.0; x + w <= kTableSize; x += 4.0) {
            const Footprint f{x, y, w, d};
            if (!overlaps(f)) return f;
        }
    }
    return candidate; // a hopelessly crowded table keeps the last candidate
}

Footprint place_inside(Rng& rng, double w, double d, const Footprint& outer,
                       const std::vector<Footprint>& siblings) {
    const double mx = 0.1 * outer.w;
    const double my = 0.1 * outer.d;
    const double x_lo = outer.x + mx;
    const double x_hi = std::max(x_lo, outer.x + outer.w - mx - w);
    const double y_lo = outer.y + my;
    const double y_hi = std::max(y_lo, outer.y + outer.d - my - d);
    Footprint f{x_lo, y_lo, w, d};
    for (int attempt = 0; attempt < 8; ++attempt) {
        f = Footprint{rng.next_double(x_lo, x_hi), rng.next_double(y_lo, y_hi), w, d};
        bool clear = true;
        for (const auto& s : siblings) {
            const bool apart = f.x + f.w <= s.x || s.x + s.w <= f.x ||
                               f.y + f.d <= s.y || s.y + s.d <= f.y;
            clear = clear && apart;
        }
        if (clear) break; // a cramped container accepts the last overlap
    }
    return f;
}

// `shift` staggers the object sideways by that fraction of its own width,
// so co-occluders cover different parts of the supporter.
Footprint place_on_top(Rng& rng, double w, double d, const Footprint& supporter,
                       double shift = 0.0) {
    double x;
    double y;
    if (w < supporter.w) {
        x = rng.next_double(supporter.x, supporter.x + supporter.w - w);
    } else {
        x = std::max(0.0, supporter.cx() - w / 2.0 + shift * w);
    }
    if (d < supporter.d) {
        y = rng.next_double(supporter.y, supporter.y + supporter.d - d);
    } else {
        y = std::max(0.0, supporter.cy() - d / 2.0);
    }
    return Footprint{std::min(x, kTableSize - w), std::min(y, kTableSize - d), w, d};
}

int add_table_object(Draft& draft, Rng& rng, std::size_t catalog, double bias,
                     const GeneratorConfig& config,
                     std::vector<Footprint>& table_level) {
    const auto& e = kCatalog[catalog];
    DraftObject o;
    o.catalog = catalog;
    o.height = e.height;
    const double w = rand_size(rng, e);
    const double d = rand_size(rng, e);
    o.footprint = place_on_table(rng, w, d, bias, config.near_threshold, table_level);
    table_level.push_back(o.footprint);
    draft.objects.push_back(std::move(o));
    return static_cast<int>(draft.objects.size() - 1);
}

int add_contained_object(Draft& draft, Rng& rng, std::size_t catalog, int container_index) {
    const auto& e = kCatalog[catalog];
    const Footprint& outer = draft.objects[container_index].footprint;
    DraftObject o;
    o.catalog = catalog;
    o.height = e.height;
    const double w = std::min(rand_size(rng, e), 0.6 * outer.w);
    const double d = std::min(rand_size(rng, e), 0.6 * outer.d);
    std::vector<Footprint> siblings;
    for (const auto& other : draft.objects) {
        if (other.support == SupportKind::in && other.support_index == container_index) {
            siblings.push_back(other.footprint);
        }
    }
    o.footprint = place_inside(rng, w, d, outer, siblings);
    o.support = SupportKind::in;
    o.support_index = container_index;
    draft.objects.push_back(std::move(o));
    return static_cast<int>(draft.objects.size() - 1);
}

// What covers is decisively bigger than what it covers; without that, the
// projection gives no cue for which object is on top.
constexpr double kCoverDominance = 1.3;

bool can_cover(std::size_t catalog, const Footprint& base) {
    return kCatalog[catalog].max_size >= kCoverDominance * std::max(base.w, base.d);
}

int add_stacked_object(Draft& draft, Rng& rng, std::size_t catalog, int supporter_index,
                       double shift = 0.0) {
    const auto& e = kCatalog[catalog];
    const Footprint& base = draft.objects[supporter_index].footprint;
    DraftObject o;
    o.catalog = catalog;
    o.height = e.height;
    const double w_lo = std::min(e.max_size, std::max(e.min_size, kCoverDominance * base.w));
    const double d_lo = std::min(e.max_size, std::max(e.min_size, kCoverDominance * base.d));
    const double w = rng.next_double(w_lo, e.max_size);
    const double d = rng.next_double(d_lo, e.max_size);
    o.footprint = place_on_top(rng, w, d, base, shift);
    o.support = SupportKind::on;
    o.support_index = supporter_index;
    draft.objects.push_back(std::move(o));
    return static_cast<int>(draft.objects.size() - 1);
}

template <std::size_t N>
std::size_t pick(Rng& rng, const std::size_t (&pool)[N]) {
    return pool[rng.next_index(N)];
}

FailureType requested_type(FixtureKind f) {
    switch (f) {
        case FixtureKind::occlusion:
        case FixtureKind::containment: return FailureType::single_spatial;
        case FixtureKind::attribute_only: return FailureType::attribute;
        default: return FailureType::compound_spatial;
    }
}

struct AttemptOutcome {
    std::optional<GeneratedScene> scene;
    int relation_count = 0;
    std::string failed_constraint;
};

AttemptOutcome attempt_scene(const GeneratorConfig& config, std::uint64_t attempt_seed,
                             double bias) {
    AttemptOutcome out;
    Rng rng(attempt_seed);

    const int n = static_cast<int>(
        rng.next_int(config.object_count_range[0], config.object_count_range[1]));

    const auto& fw = config.failure_weights;
    const double total = fw.single_spatial + fw.compound_spatial + fw.attribute;
    const double roll = rng.next_double(0.0, total);
    FixtureKind fixture;
    if (roll < fw.single_spatial) {
        fixture = rng.next_bool(0.5) ? FixtureKind::occlusion : FixtureKind::containment;
    } else if (roll < fw.single_spatial + fw.compound_spatial) {
        const int variant = static_cast<int>(rng.next_index(3));
        fixture = variant == 0   ? FixtureKind::two_occluders
                  : variant == 1 ? FixtureKind::occluder_in_container
                                 : FixtureKind::nested_containers;
    } else {
        fixture = FixtureKind::attribute_only;
    }

    Draft draft;
    std::vector<Footprint> table_level;

    switch (fixture) {
        case FixtureKind::occlusion: {
            draft.desired = add_table_object(draft, rng, pick(rng, kSmallPickables), bias,
                                             config, table_level);
            std::vector<std::size_t> covers;
            for (const std::size_t c : kCoverers) {
                if (can_cover(c, draft.objects[draft.desired].footprint)) covers.push_back(c);
            }
            add_stacked_object(draft, rng,
                               covers.empty() ? kCoverers[0]
                                              : covers[rng.next_index(covers.size())],
                               draft.desired);
            break;
        }
        case FixtureKind::containment: {
            const std::size_t box = rng.next_bool(0.5) ? kBoxIndex : kBasketIndex;
            const int c = add_table_object(draft, rng, box, bias, config, table_level);
            draft.objects[c].container_open = false;
            draft.objects[c].container_flag_locked = true;
            draft.desired = add_contained_object(draft, rng, pick(rng, kSmallPickables), c);
            break;
        }
        case FixtureKind::two_occluders: {
            draft.desired = add_table_object(draft, rng, pick(rng, kSmallPickables), bias,
                                             config, table_level);
            std::vector<std::size_t> covers;
            for (const std::size_t c : kCoverers) {
                if (can_cover(c, draft.objects[draft.desired].footprint)) covers.push_back(c);
            }
            const auto cover_pick = [&]() {
                return covers.empty() ? kCoverers[0]
                                      : covers[rng.next_index(covers.size())];
            };
            add_stacked_object(draft, rng, cover_pick(), draft.desired, -0.35);
            add_stacked_object(draft, rng, cover_pick(), draft.desired, 0.35);
            break;
        }
        case FixtureKind::occluder_in_container: {
            const std::size_t box = rng.next_bool(0.5) ? kBoxIndex : kBasketIndex;
            const int c = add_table_object(draft, rng, box, bias, config, table_level);
            draft.objects[c].container_open = false;
            draft.objects[c].container_flag_locked = true;
            const std::size_t small = pick(rng, kSmallPickables);
            draft.desired = add_contained_object(draft, rng, small, c);
            // the in-box occluder is a napkin: flat, and it fits
            add_stacked_object(draft, rng, 3, draft.desired);
            break;
        }
        case FixtureKind::nested_containers: {
            const int outer = add_table_object(draft, rng, kBoxIndex, bias, config, table_level);
            draft.objects[outer].container_open = false;
            draft.objects[outer].container_flag_locked = true;
            const int inner = add_contained_object(draft, rng, kBasketIndex, outer);
            draft.objects[inner].container_open = false;
            draft.objects[inner].container_flag_locked = true;
            draft.desired = add_contained_object(draft, rng, pick(rng, kSmallPickables), inner);
            break;
        }
        case FixtureKind::attribute_only: {
            const std::size_t label = pick(rng, kAttributeCarriers);
            if (rng.next_bool(0.3)) {
                const std::size_t box = rng.next_bool(0.5) ? kBoxIndex : kBasketIndex;
                const int c = add_table_object(draft, rng, box, bias, config, table_level);
                draft.objects[c].container_open = true; // open container is not a cause
                draft.objects[c].container_flag_locked = true;
                draft.desired = add_contained_object(draft, rng, label, c);
            } else {
                draft.desired =
                    add_table_object(draft, rng, label, bias, config, table_level);
            }
            draft.objects[draft.desired].attribute = kCatalog[label].affinity;
            break;
        }
    }

    if (static_cast<int>(draft.objects.size()) > n) {
        if (static_cast<int>(draft.objects.size()) > config.object_count_range[1]) {
            out.failed_constraint = "object_count_range";
            return out;
        }
    }

    // Filler objects up to the sampled count. Stacking follows tabletop
    // statistics: what lands on top is a flat coverer at least as large as
    // what it covers, so box geometry stays informative about direction.
    while (static_cast<int>(draft.objects.size()) < n) {
        const double support_roll = rng.next_double(0.0, 1.0);
        bool placed = false;
        if (support_roll < 0.20) {
            std::vector<int> anchors;
            for (int i = 0; i < static_cast<int>(draft.objects.size()); ++i) {
                if (i != draft.desired) anchors.push_back(i);
            }
            if (!anchors.empty()) {
                const int anchor =
                    anchors[rng.next_index(anchors.size())];
                std::vector<std::size_t> covers;
                for (const std::size_t c : kCoverers) {
                    if (can_cover(c, draft.objects[anchor].footprint)) covers.push_back(c);
                }
                if (!covers.empty()) {
                    add_stacked_object(draft, rng, covers[rng.next_index(covers.size())],
                                       anchor);
                    placed = true;
                }
            }
        } else if (support_roll < 0.32) {
            // drop a small thing into a container big enough to take it
            const std::size_t small = pick(rng, kSmallPickables);
            std::vector<int> bins;
            for (int i = 0; i < static_cast<int>(draft.objects.size()); ++i) {
                const auto& o = draft.objects[i];
                if (kCatalog[o.catalog].container && i != draft.desired &&
                    o.footprint.w * 0.6 >= kCatalog[small].min_size &&
                    o.footprint.d * 0.6 >= kCatalog[small].min_size) {
                    bins.push_back(i);
                }
            }
            if (!bins.empty()) {
                add_contained_object(draft, rng, small, bins[rng.next_index(bins.size())]);
                placed = true;
            }
        }
        if (!placed) {
            add_table_object(draft, rng, rng.next_index(kCatalogSize), bias, config,
                             table_level);
        }
    }

    // Attributes: the desired object's attribute is fixed by the fixture,
    // everything else follows the configured rate and the label's affinity.
    for (int i = 0; i < static_cast<int>(draft.objects.size()); ++i) {
        auto& o = draft.objects[i];
        const auto& e = kCatalog[o.catalog];
        if (e.container && !o.container_flag_locked) {
            o.container_open = rng.next_bool(config.container_open_rate);
        }
        if (i == draft.desired) continue;
        if (rng.next_bool(config.attribute_rate)) {
            o.attribute = e.affinity;
        }
    }

    // Shuffle identity assignment so the desired object is not always node 0.
    std::vector<int> order(draft.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    std::vector<int> new_id(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        new_id[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);
    }

    std::vector<PlacedObject> objects(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const DraftObject& src = draft.objects[static_cast<std::size_t>(order[pos])];
        PlacedObject& dst = objects[pos];
        dst.id = static_cast<NodeId>(pos);
        dst.label = kCatalog[src.catalog].label;
        dst.attribute = src.attribute;
        dst.footprint = src.footprint;
        dst.height = src.height;
        dst.support = src.support;
        dst.support_id = src.support_index < 0
                             ? -1
                             : new_id[static_cast<std::size_t>(src.support_index)];
        dst.is_container = kCatalog[src.catalog].container;
        dst.container_open = src.container_open;
    }
    const NodeId desired = new_id[static_cast<std::size_t>(draft.desired)];

    auto triples = derive_predicates(objects, config);
    out.relation_count = static_cast<int>(triples.size());
    if (out.relation_count < config.relation_target_range[0] ||
        out.relation_count > config.relation_target_range[1]) {
        out.failed_constraint = "relation_target_range";
        return out;
    }

    auto causes = derive_failure_causes(objects, triples, desired, config);
    const FailureType want = requested_type(fixture);
    if (causes.empty() || classify_failure_type(causes) != want) {
        out.failed_constraint = "failure_cause_consistency";
        return out;
    }

    SceneGraph graph;
    graph.predicates = default_predicates();
    graph.attributes = default_attributes();
    for (const auto& o : objects) {
        SceneNode node;
        node.id = o.id;
        node.label = o.label;
        node.attribute = o.attribute;
        node.bbox = project_bbox(o, config.camera,
                                 Rng::derive(attempt_seed, 0xB0B0 + static_cast<std::uint64_t>(o.id)));
        graph.nodes.push_back(std::move(node));
    }
    graph.triples = std::move(triples);

    FailureScenario scenario;
    scenario.graph = std::move(graph);
    scenario.desired_object = desired;
    scenario.causes = std::move(causes);
    scenario.failure_type = want;

    out.scene = GeneratedScene{std::move(objects), std::move(scenario)};
    return out;
}

} // namespace

GeneratedScene generate_scene(const GeneratorConfig& config, std::uint64_t seed) {
    validate_config(config);
    constexpr int kMaxAttempts = 64;
    double bias = 0.45;
    std::string last_constraint = "relation_target_range";
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        AttemptOutcome outcome =
            attempt_scene(config, Rng::derive(seed, 0x5CE4E000 + static_cast<std::uint64_t>(attempt)), bias);
        if (outcome.scene.has_value()) return std::move(*outcome.scene);
        last_constraint = outcome.failed_constraint;
        if (outcome.failed_constraint == "relation_target_range") {
            if (outcome.relation_count < config.relation_target_range[0]) {
                bias = std::min(0.95, bias + 0.12);
            } else {
                bias = std::max(0.05, bias - 0.12);
            }
        } else if (outcome.failed_constraint == "object_count_range") {
            break; // the fixture cannot fit; retrying will not help
        }
    }
    throw ValidationError("generation",
                          "could not satisfy constraint " + last_constraint + " for seed " +
                              std::to_string(seed));
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    throw ValidationError("bad_split", "unrepresentable enum value");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw ValidationError("bad_split", std::string(s));
}

std::array<std::size_t, 3> split_counts(std::size_t n_scenes) {
    // 66/17/17 largest-remainder, in integer arithmetic so ties are exact.
    constexpr std::size_t pct[3] = {66, 17, 17};
    std::array<std::size_t, 3> counts{};
    std::size_t rem[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        counts[i] = n_scenes * pct[i] / 100;
        rem[i] = n_scenes * pct[i] % 100;
        assigned += counts[i];
    }
    std::size_t leftover = n_scenes - assigned;
    while (leftover > 0) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (rem[i] > rem[best]) best = i;
        }
        counts[best] += 1;
        rem[best] = 0;
        --leftover;
    }
    if (n_scenes >= 3) {
        // every split must be usable
        for (int i = 0; i < 3; ++i) {
            if (counts[i] == 0) {
                int donor = 0;
                for (int j = 1; j < 3; ++j) {
                    if (counts[j] > counts[donor]) donor = j;
                }
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }
    return counts;
}

std::vector<std::size_t> Corpus::indices_of(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        if (splits[i] == split) out.push_back(i);
    }
    return out;
}

Corpus build_corpus(const GeneratorConfig& config, std::size_t n_scenes, std::uint64_t seed) {
    if (n_scenes < 3) {
        throw ValidationError("too_few_scenes", "a corpus needs at least 3 scenes");
    }
    validate_config(config);
    Corpus corpus;
    corpus.config = config;
    corpus.config.rng_seed = seed;
    corpus.scenes.reserve(n_scenes);
    for (std::size_t i = 0; i < n_scenes; ++i) {
        corpus.scenes.push_back(generate_scene(corpus.config, Rng::derive(seed, i)).scenario);
    }
    const auto counts = split_counts(n_scenes);
    corpus.splits.reserve(n_scenes);
    for (std::size_t i = 0; i < n_scenes; ++i) {
        if (i < counts[0]) {
            corpus.splits.push_back(Split::train);
        } else if (i < counts[0] + counts[1]) {
            corpus.splits.push_back(Split::validation);
        } else {
            corpus.splits.push_back(Split::test);
        }
    }
    return corpus;
}

OrderedJson generator_config_to_json(const GeneratorConfig& c) {
    OrderedJson j;
    j["object_count_range"] = c.object_count_range;
    j["relation_target_range"] = c.relation_target_range;
    j["attribute_rate"] = c.attribute_rate;
    j["near_threshold"] = c.near_threshold;
    j["close_threshold"] = c.close_threshold;
    j["rng_seed"] = c.rng_seed;
    j["failure_weights"] = {{"single_spatial", c.failure_weights.single_spatial},
                            {"compound_spatial", c.failure_weights.compound_spatial},
                            {"attribute", c.failure_weights.attribute}};
    j["container_open_rate"] = c.container_open_rate;
    j["camera"] = {{"scale_x", c.camera.scale_x},
                   {"scale_y", c.camera.scale_y},
                   {"height_scale", c.camera.height_scale},
                   {"jitter", c.camera.jitter}};
    return j;
}

namespace {

[[noreturn]] void config_schema_error(const std::string& what) {
    throw ValidationError("config_schema", what);
}

double num_field(const OrderedJson& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        config_schema_error(std::string("missing or non-numeric field `") + key + "`");
    }
    return j.at(key).get<double>();
}

} // namespace

GeneratorConfig generator_config_from_json(const OrderedJson& j) {
    if (!j.is_object()) config_schema_error("generator config must be an object");
    static const char* known[] = {"object_count_range", "relation_target_range",
                                  "attribute_rate",     "near_threshold",
                                  "close_threshold",    "rng_seed",
                                  "failure_weights",    "container_open_rate",
                                  "camera"};
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) config_schema_error("unknown field `" + item.key() + "`");
    }
    GeneratorConfig c;
    auto range = [&](const char* key, std::array<int, 2>& out) {
        if (!j.contains(key)) return;
        const auto& r = j.at(key);
        if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
            !r[1].is_number_integer()) {
            config_schema_error(std::string("field `") + key + "` must be [lo, hi]");
        }
        out = {r[0].get<int>(), r[1].get<int>()};
    };
    range("object_count_range", c.object_count_range);
    range("relation_target_range", c.relation_target_range);
    if (j.contains("attribute_rate")) c.attribute_rate = num_field(j, "attribute_rate");
    if (j.contains("near_threshold")) c.near_threshold = num_field(j, "near_threshold");
    if (j.contains("close_threshold")) c.close_threshold = num_field(j, "close_threshold");
    if (j.contains("rng_seed")) {
        if (!j.at("rng_seed").is_number_integer() && !j.at("rng_seed").is_number_unsigned()) {
            config_schema_error("field `rng_seed` must be an integer");
        }
        c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    }
    if (j.contains("failure_weights")) {
        const auto& w = j.at("failure_weights");
        c.failure_weights.single_spatial = num_field(w, "single_spatial");
        c.failure_weights.compound_spatial = num_field(w, "compound_spatial");
        c.failure_weights.attribute = num_field(w, "attribute");
    }
    if (j.contains("container_open_rate")) {
        c.container_open_rate = num_field(j, "container_open_rate");
    }
    if (j.contains("camera")) {
        const auto& cam = j.at("camera");
        c.camera.scale_x = num_field(cam, "scale_x");
        c.camera.scale_y = num_field(cam, "scale_y");
        c.camera.height_scale = num_field(cam, "height_scale");
        c.camera.jitter = num_field(cam, "jitter");
    }
    validate_config(c);
    return c;
}

OrderedJson corpus_to_json(const Corpus& corpus) {
    OrderedJson j;
    j["format_version"] = 1;
    j["config"] = generator_config_to_json(corpus.config);
    OrderedJson scenes = OrderedJson::array();
    for (std::size_t i = 0; i < corpus.scenes.size(); ++i) {
        OrderedJson entry;
        entry["split"] = to_string(corpus.splits[i]);
        entry["scene"] = scene_to_json(corpus.scenes[i]);
        scenes.push_back(std::move(entry));
    }
    j["scenes"] = std::move(scenes);
    return j;
}

Corpus corpus_from_json(const OrderedJson& j) {
    check_format_version(j, 1, "corpus");
    if (!j.contains("config") || !j.contains("scenes") || !j.at("scenes").is_array()) {
        throw ValidationError("corpus_schema", "expected `config` and `scenes` fields");
    }
    Corpus corpus;
    corpus.config = generator_config_from_json(j.at("config"));
    const auto& scenes = j.at("scenes");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& entry = scenes[i];
        const std::string where = "scenes[" + std::to_string(i) + "]";
        if (!entry.is_object() || !entry.contains("split") || !entry.contains("scene")) {
            throw ValidationError("corpus_schema", where + ": expected {split, scene}");
        }
        corpus.splits.push_back(split_from_string(entry.at("split").get<std::string>()));
        LoadedScene loaded = scene_from_json(entry.at("scene"));
        if (!loaded.scenario.has_value()) {
            throw ValidationError("corpus_schema", where + ": scene has no failure block");
        }
        corpus.scenes.push_back(std::move(*loaded.scenario));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    write_json_file(path, corpus_to_json(corpus));
}

Corpus load_corpus(const std::filesystem::path& path) {
    return corpus_from_json(read_json_file(path));
}

} // namespace pickwhy
