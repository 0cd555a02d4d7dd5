#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "pickwhy/errors.hpp"

namespace pickwhy {

// CART-style random forest classifier: Gini impurity, midpoint thresholds
// between consecutive distinct feature values, bootstrap sample per tree,
// random feature subset per split, majority vote with ties to the lowest
// class index. Every tree derives its own seed from the master seed, so
// serial and parallel training produce identical models and the first k
// trees do not change when n_trees grows.

struct ForestHyperparams {
    int n_trees = 50;
    int max_depth = 12;
    int min_leaf = 2;
    int feature_subsample = 0; // 0 means ceil(sqrt(n_features))

    bool operator==(const ForestHyperparams&) const = default;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> distribution; // leaves only: normalized class histogram

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    const std::vector<double>& leaf_distribution(std::span<const double> features) const;
    int predict(std::span<const double> features) const; // argmax, tie -> lowest

    bool operator==(const DecisionTree&) const = default;
};

class ForestModel {
public:
    ForestModel() = default;

    int predict(std::span<const double> features) const;
    std::vector<int> vote_counts(std::span<const double> features) const;

    int n_classes() const { return n_classes_; }
    int n_features() const { return n_features_; }
    const ForestHyperparams& hyperparams() const { return hyper_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }
    // Class distribution of the training set; argmax is the prior class.
    const std::vector<double>& prior() const { return prior_; }
    int prior_class() const;
    // Set when training saw fewer than two classes.
    bool constant_warning() const { return constant_warning_; }

    nlohmann::ordered_json to_json() const;
    static ForestModel from_json(const nlohmann::ordered_json& j);

    bool operator==(const ForestModel&) const = default;

    friend ForestModel train_forest(const std::vector<std::vector<double>>& features,
                                    const std::vector<int>& labels, int n_classes,
                                    const ForestHyperparams& hyper, std::uint64_t seed);

private:
    ForestHyperparams hyper_;
    int n_classes_ = 0;
    int n_features_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> prior_;
    bool constant_warning_ = false;
    std::vector<DecisionTree> trees_;
};

// Throws ValidationError("empty_training_set") when there are no rows.
// One distinct label trains a constant model with constant_warning() set.
ForestModel train_forest(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, int n_classes,
                         const ForestHyperparams& hyper, std::uint64_t seed);

// Deterministic k-fold accuracy (seeded shuffle, folds by round robin).
double cv_accuracy(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, int n_classes,
                   const ForestHyperparams& hyper, int folds, std::uint64_t seed);

// 5-fold grid search over max_depth {8,12,16} x n_trees {25,50}.
ForestHyperparams select_hyperparams(const std::vector<std::vector<double>>& features,
                                     const std::vector<int>& labels, int n_classes,
                                     std::uint64_t seed);

} // namespace pickwhy
