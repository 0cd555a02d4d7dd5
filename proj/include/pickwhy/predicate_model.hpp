#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pickwhy/forest.hpp"
#include "pickwhy/scene_json.hpp"
#include "pickwhy/scene_model.hpp"
#include "pickwhy/synthetic_scenes.hpp"

namespace pickwhy {

// Predicate and attribute classification over engineered bounding-box
// features. A decision forest over ground-truth boxes and object labels
// stands in for an image model; the evaluation regime (predict the edge
// label for a pair of ground-truth boxes) is unchanged.

inline constexpr const char* kNoneRelation = "none_rel";

// Feature layout, in order:
//   dx, dy              center offset, normalized by the mean box diagonal
//                       (antisymmetric under argument swap)
//   w_ratio, h_ratio    w_i/w_j, h_i/h_j (reciprocal under swap)
//   iou                 intersection over union (symmetric)
//   i_inside_j, j_inside_i
//   distance            normalized center distance (symmetric)
//   log_area_ratio      log(area_i / area_j)
//   cover_i, cover_j    intersection area over each box's own area
//   one-hot subject label, one-hot object label
std::size_t pair_feature_length(const Vocabulary& label_vocab);
std::vector<double> extract_pair_features(const SceneNode& subject, const SceneNode& object,
                                          const Vocabulary& label_vocab);

// Per-node features: one-hot label then x, y, w, h, aspect, area.
std::size_t node_feature_length(const Vocabulary& label_vocab);
std::vector<double> extract_node_features(const SceneNode& node,
                                          const Vocabulary& label_vocab);

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<std::string> classes);

    void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

    std::size_t size() const { return classes_.size(); }
    const std::vector<std::string>& classes() const { return classes_; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const;
    std::uint64_t count(const std::string& truth, const std::string& predicted) const;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t total() const;
    std::uint64_t trace() const;
    double accuracy() const; // trace / total

    // header row of predicted classes, then one row per ground-truth class
    std::string to_csv() const;

private:
    std::vector<std::string> classes_;
    std::vector<std::vector<std::uint64_t>> counts_;
};

struct PredicateModel {
    Vocabulary predicates;      // predicate classes; none_rel is appended at index size()
    Vocabulary attributes;
    Vocabulary labels;          // object label vocabulary (one-hot order)
    ForestModel predicate_forest;
    ForestModel attribute_forest;

    std::size_t none_rel_class() const { return predicates.size(); }
    std::vector<std::string> predicate_classes() const; // predicates + none_rel

    OrderedJson to_json() const; // format_version 1
    static PredicateModel from_json(const OrderedJson& j);

    bool operator==(const PredicateModel&) const = default;
};

struct CandidatePair {
    NodeId subject = 0;
    NodeId object = 0;
};

struct PredictedPredicate {
    NodeId subject = 0;
    NodeId object = 0;
    std::size_t class_index = 0; // == predicates.size() means none_rel

    bool operator==(const PredictedPredicate&) const = default;
};

// Label vocabulary: lexicographically sorted unique node labels.
Vocabulary collect_label_vocabulary(std::span<const FailureScenario> scenes);

std::vector<CandidatePair> all_ordered_pairs(const SceneGraph& graph);

// The oracle class of a pair: the predicate index of the matching triple,
// or none_rel when the pair is unrelated.
std::size_t ground_truth_class(const SceneGraph& graph, NodeId subject, NodeId object);

PredicateModel train_predicate_model(std::span<const FailureScenario> train_scenes,
                                     const ForestHyperparams& hyper, std::uint64_t seed);

// One prediction per candidate pair. Throws ValidationError("vocab_mismatch")
// when the graph's predicate vocabulary differs from the model's.
std::vector<PredictedPredicate> classify_predicates(const PredicateModel& model,
                                                    const SceneGraph& graph,
                                                    std::span<const CandidatePair> pairs);

// Predictions as graph triples; none_rel pairs are dropped.
std::vector<RelationTriple> predicted_triples(const PredicateModel& model,
                                              const SceneGraph& graph,
                                              std::span<const CandidatePair> pairs);

// One attribute name per node; unseen labels fall back to the prior class.
std::vector<std::string> classify_attributes(const PredicateModel& model,
                                             std::span<const SceneNode> nodes);

struct PredicateEvaluation {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

// Scores a classifier over every ordered pair of every scene. The abstract
// form lets tests plug in perfect or constant classifiers.
using PairClassifier =
    std::function<std::size_t(const SceneGraph&, const SceneNode&, const SceneNode&)>;

PredicateEvaluation evaluate_predicates(const PairClassifier& classifier,
                                        std::span<const FailureScenario> test_scenes,
                                        const Vocabulary& predicates);
PredicateEvaluation evaluate_predicates(const PredicateModel& model,
                                        std::span<const FailureScenario> test_scenes);

double evaluate_attributes(const PredicateModel& model,
                           std::span<const FailureScenario> test_scenes);

void save_predicate_model(const PredicateModel& model, const std::filesystem::path& path);
PredicateModel load_predicate_model(const std::filesystem::path& path);

} // namespace pickwhy
