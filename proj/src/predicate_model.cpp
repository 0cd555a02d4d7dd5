#include "pickwhy/predicate_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pickwhy/rng.hpp"

namespace pickwhy {

std::size_t pair_feature_length(const Vocabulary& label_vocab) {
    return 11 + 2 * label_vocab.size();
}

std::vector<double> extract_pair_features(const SceneNode& subject, const SceneNode& object,
                                          const Vocabulary& label_vocab) {
    const BoundingBox2D& a = subject.bbox;
    const BoundingBox2D& b = object.bbox;
    if (a.area() <= 0.0 || b.area() <= 0.0) {
        throw ValidationError("zero_area_bbox",
                              "pair features need boxes with positive area");
    }
    const double diag_a = std::sqrt(a.w * a.w + a.h * a.h);
    const double diag_b = std::sqrt(b.w * b.w + b.h * b.h);
    const double norm = (diag_a + diag_b) / 2.0;

    std::vector<double> f;
    f.reserve(pair_feature_length(label_vocab));
    const double dx = (b.cx() - a.cx()) / norm;
    const double dy = (b.cy() - a.cy()) / norm;
    f.push_back(dx);
    f.push_back(dy);
    f.push_back(a.w / b.w);
    f.push_back(a.h / b.h);
    f.push_back(bbox_iou(a, b));
    f.push_back(bbox_contains(b, a) ? 1.0 : 0.0); // subject inside object
    f.push_back(bbox_contains(a, b) ? 1.0 : 0.0); // object inside subject
    f.push_back(std::sqrt(dx * dx + dy * dy));
    f.push_back(std::log(a.area() / b.area()));
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    f.push_back(inter / a.area());
    f.push_back(inter / b.area());

    for (const auto* node : {&subject, &object}) {
        const auto idx = label_vocab.index_of(node->label);
        for (std::size_t i = 0; i < label_vocab.size(); ++i) {
            f.push_back(idx.has_value() && *idx == i ? 1.0 : 0.0);
        }
    }
    return f;
}

std::size_t node_feature_length(const Vocabulary& label_vocab) {
    return label_vocab.size() + 6;
}

std::vector<double> extract_node_features(const SceneNode& node,
                                          const Vocabulary& label_vocab) {
    if (node.bbox.area() <= 0.0) {
        throw ValidationError("zero_area_bbox", "node features need a positive-area box");
    }
    std::vector<double> f;
    f.reserve(node_feature_length(label_vocab));
    const auto idx = label_vocab.index_of(node.label);
    for (std::size_t i = 0; i < label_vocab.size(); ++i) {
        f.push_back(idx.has_value() && *idx == i ? 1.0 : 0.0);
    }
    f.push_back(node.bbox.x);
    f.push_back(node.bbox.y);
    f.push_back(node.bbox.w);
    f.push_back(node.bbox.h);
    f.push_back(node.bbox.w / node.bbox.h);
    f.push_back(node.bbox.area());
    return f;
}

// ---------------------------------------------------------------------------
// ConfusionMatrix
// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : classes_(std::move(classes)),
      counts_(classes_.size(), std::vector<std::uint64_t>(classes_.size(), 0)) {
    if (classes_.empty()) {
        throw ValidationError("empty_confusion", "a confusion matrix needs classes");
    }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    counts_.at(truth).at(predicted) += count;
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth).at(predicted);
}

std::uint64_t ConfusionMatrix::count(const std::string& truth,
                                     const std::string& predicted) const {
    const auto find = [this](const std::string& name) {
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            if (classes_[i] == name) return i;
        }
        throw ValidationError("unknown_class", name);
    };
    return at(find(truth), find(predicted));
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t sum = 0;
    for (const auto c : counts_.at(truth)) sum += c;
    return sum;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < classes_.size(); ++i) sum += row_sum(i);
    return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < classes_.size(); ++i) sum += counts_[i][i];
    return sum;
}

double ConfusionMatrix::accuracy() const {
    const std::uint64_t n = total();
    if (n == 0) throw ValidationError("empty_confusion", "no counts recorded");
    return static_cast<double>(trace()) / static_cast<double>(n);
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "truth";
    for (const auto& c : classes_) out << "," << c;
    out << "\n";
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        out << classes_[i];
        for (std::size_t j = 0; j < classes_.size(); ++j) out << "," << counts_[i][j];
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

std::vector<std::string> PredicateModel::predicate_classes() const {
    std::vector<std::string> classes = predicates.names();
    classes.push_back(kNoneRelation);
    return classes;
}

Vocabulary collect_label_vocabulary(std::span<const FailureScenario> scenes) {
    std::set<std::string> labels;
    for (const auto& s : scenes) {
        for (const auto& n : s.graph.nodes) labels.insert(n.label);
    }
    return Vocabulary(std::vector<std::string>(labels.begin(), labels.end()));
}

std::vector<CandidatePair> all_ordered_pairs(const SceneGraph& graph) {
    std::vector<CandidatePair> pairs;
    for (const auto& a : graph.nodes) {
        for (const auto& b : graph.nodes) {
            if (a.id != b.id) pairs.push_back({a.id, b.id});
        }
    }
    return pairs;
}

std::size_t ground_truth_class(const SceneGraph& graph, NodeId subject, NodeId object) {
    for (const auto& t : graph.triples) {
        if (t.subject == subject && t.object == object) {
            return *graph.predicates.index_of(t.predicate);
        }
    }
    return graph.predicates.size(); // none_rel
}

PredicateModel train_predicate_model(std::span<const FailureScenario> train_scenes,
                                     const ForestHyperparams& hyper, std::uint64_t seed) {
    if (train_scenes.empty()) {
        throw ValidationError("empty_training_set", "no training scenes");
    }
    PredicateModel model;
    model.predicates = train_scenes.front().graph.predicates;
    model.attributes = train_scenes.front().graph.attributes;
    model.labels = collect_label_vocabulary(train_scenes);

    std::vector<std::vector<double>> pair_x;
    std::vector<int> pair_y;
    std::vector<std::vector<double>> node_x;
    std::vector<int> node_y;
    for (const auto& scene : train_scenes) {
        if (!(scene.graph.predicates == model.predicates) ||
            !(scene.graph.attributes == model.attributes)) {
            throw ValidationError("vocab_mismatch",
                                  "training scenes disagree on vocabularies");
        }
        for (const auto& pair : all_ordered_pairs(scene.graph)) {
            pair_x.push_back(extract_pair_features(scene.graph.node(pair.subject),
                                                   scene.graph.node(pair.object),
                                                   model.labels));
            pair_y.push_back(static_cast<int>(
                ground_truth_class(scene.graph, pair.subject, pair.object)));
        }
        for (const auto& node : scene.graph.nodes) {
            node_x.push_back(extract_node_features(node, model.labels));
            node_y.push_back(static_cast<int>(*model.attributes.index_of(node.attribute)));
        }
    }

    // Unrelated pairs dominate the data; replicate minority predicate rows so
    // no class sits below a third of the largest one.
    {
        std::vector<std::size_t> counts(model.predicates.size() + 1, 0);
        for (const int y : pair_y) counts[static_cast<std::size_t>(y)]++;
        const std::size_t top = *std::max_element(counts.begin(), counts.end());
        const std::size_t rows = pair_x.size();
        for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t c = static_cast<std::size_t>(pair_y[i]);
            if (counts[c] == 0 || counts[c] * 3 >= top) continue;
            const std::size_t reps = top / (3 * counts[c]);
            for (std::size_t r = 0; r < reps; ++r) {
                pair_x.push_back(pair_x[i]);
                pair_y.push_back(pair_y[i]);
            }
        }
    }

    model.predicate_forest =
        train_forest(pair_x, pair_y, static_cast<int>(model.predicates.size()) + 1, hyper,
                     Rng::derive(seed, 1));
    model.attribute_forest =
        train_forest(node_x, node_y, static_cast<int>(model.attributes.size()), hyper,
                     Rng::derive(seed, 2));
    return model;
}

std::vector<PredictedPredicate> classify_predicates(const PredicateModel& model,
                                                    const SceneGraph& graph,
                                                    std::span<const CandidatePair> pairs) {
    if (!(graph.predicates == model.predicates)) {
        throw ValidationError("vocab_mismatch",
                              "scene and model predicate vocabularies differ");
    }
    std::vector<PredictedPredicate> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const auto features = extract_pair_features(graph.node(pair.subject),
                                                    graph.node(pair.object), model.labels);
        out.push_back({pair.subject, pair.object,
                       static_cast<std::size_t>(model.predicate_forest.predict(features))});
    }
    return out;
}

std::vector<RelationTriple> predicted_triples(const PredicateModel& model,
                                              const SceneGraph& graph,
                                              std::span<const CandidatePair> pairs) {
    std::vector<RelationTriple> out;
    for (const auto& p : classify_predicates(model, graph, pairs)) {
        if (p.class_index < model.predicates.size()) {
            out.push_back({p.subject, model.predicates.name(p.class_index), p.object});
        }
    }
    return out;
}

std::vector<std::string> classify_attributes(const PredicateModel& model,
                                             std::span<const SceneNode> nodes) {
    std::vector<std::string> out;
    out.reserve(nodes.size());
    for (const auto& node : nodes) {
        if (!model.labels.contains(node.label)) {
            // unseen label: defined fallback is the training prior
            out.push_back(model.attributes.name(
                static_cast<std::size_t>(model.attribute_forest.prior_class())));
            continue;
        }
        const auto features = extract_node_features(node, model.labels);
        out.push_back(model.attributes.name(
            static_cast<std::size_t>(model.attribute_forest.predict(features))));
    }
    return out;
}

PredicateEvaluation evaluate_predicates(const PairClassifier& classifier,
                                        std::span<const FailureScenario> test_scenes,
                                        const Vocabulary& predicates) {
    if (test_scenes.empty()) {
        throw ValidationError("empty_test_set", "predicate evaluation needs test scenes");
    }
    std::vector<std::string> classes = predicates.names();
    classes.push_back(kNoneRelation);
    ConfusionMatrix confusion(classes);
    for (const auto& scene : test_scenes) {
        for (const auto& pair : all_ordered_pairs(scene.graph)) {
            const std::size_t truth =
                ground_truth_class(scene.graph, pair.subject, pair.object);
            const std::size_t predicted = classifier(
                scene.graph, scene.graph.node(pair.subject), scene.graph.node(pair.object));
            confusion.add(truth, predicted);
        }
    }
    return PredicateEvaluation{confusion.accuracy(), std::move(confusion)};
}

PredicateEvaluation evaluate_predicates(const PredicateModel& model,
                                        std::span<const FailureScenario> test_scenes) {
    return evaluate_predicates(
        [&model](const SceneGraph& graph, const SceneNode& a, const SceneNode& b) {
            if (!(graph.predicates == model.predicates)) {
                throw ValidationError("vocab_mismatch",
                                      "scene and model predicate vocabularies differ");
            }
            return static_cast<std::size_t>(
                model.predicate_forest.predict(extract_pair_features(a, b, model.labels)));
        },
        test_scenes, model.predicates);
}

double evaluate_attributes(const PredicateModel& model,
                           std::span<const FailureScenario> test_scenes) {
    if (test_scenes.empty()) {
        throw ValidationError("empty_test_set", "attribute evaluation needs test scenes");
    }
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const auto& scene : test_scenes) {
        const auto predicted = classify_attributes(model, scene.graph.nodes);
        for (std::size_t i = 0; i < scene.graph.nodes.size(); ++i) {
            correct += predicted[i] == scene.graph.nodes[i].attribute ? 1 : 0;
            total += 1;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

OrderedJson PredicateModel::to_json() const {
    OrderedJson j;
    j["format_version"] = 1;
    j["kind"] = "predicate_model";
    j["predicates"] = predicates.names();
    j["attributes"] = attributes.names();
    j["labels"] = labels.names();
    j["predicate_forest"] = predicate_forest.to_json();
    j["attribute_forest"] = attribute_forest.to_json();
    return j;
}

PredicateModel PredicateModel::from_json(const OrderedJson& j) {
    check_format_version(j, 1, "predicate model");
    if (!j.contains("kind") || j.at("kind") != "predicate_model") {
        throw ValidationError("model_schema", "not a predicate model file");
    }
    PredicateModel m;
    try {
        m.predicates = Vocabulary(j.at("predicates").get<std::vector<std::string>>());
        m.attributes = Vocabulary(j.at("attributes").get<std::vector<std::string>>());
        m.labels = Vocabulary(j.at("labels").get<std::vector<std::string>>());
        m.predicate_forest = ForestModel::from_json(j.at("predicate_forest"));
        m.attribute_forest = ForestModel::from_json(j.at("attribute_forest"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model_schema", e.what());
    }
    return m;
}

void save_predicate_model(const PredicateModel& model, const std::filesystem::path& path) {
    write_json_file(path, model.to_json());
}

PredicateModel load_predicate_model(const std::filesystem::path& path) {
    return PredicateModel::from_json(read_json_file(path));
}

} // namespace pickwhy
