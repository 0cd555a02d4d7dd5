#include "pickwhy/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "pickwhy/rng.hpp"

namespace pickwhy {

const std::vector<double>& DecisionTree::leaf_distribution(
    std::span<const double> features) const {
    int at = 0;
    for (;;) {
        const TreeNode& n = nodes[static_cast<std::size_t>(at)];
        if (n.is_leaf()) return n.distribution;
        at = features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
}

int DecisionTree::predict(std::span<const double> features) const {
    const auto& dist = leaf_distribution(features);
    int best = 0;
    for (int c = 1; c < static_cast<int>(dist.size()); ++c) {
        if (dist[static_cast<std::size_t>(c)] > dist[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
}

std::vector<int> ForestModel::vote_counts(std::span<const double> features) const {
    std::vector<int> votes(static_cast<std::size_t>(n_classes_), 0);
    for (const auto& tree : trees_) {
        votes[static_cast<std::size_t>(tree.predict(features))]++;
    }
    return votes;
}

int ForestModel::predict(std::span<const double> features) const {
    if (static_cast<int>(features.size()) != n_features_) {
        throw ValidationError("feature_length",
                              "expected " + std::to_string(n_features_) + " features, got " +
                                  std::to_string(features.size()));
    }
    const auto votes = vote_counts(features);
    int best = 0;
    for (int c = 1; c < n_classes_; ++c) {
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) {
            best = c;
        }
    }
    return best;
}

int ForestModel::prior_class() const {
    int best = 0;
    for (int c = 1; c < static_cast<int>(prior_.size()); ++c) {
        if (prior_[static_cast<std::size_t>(c)] > prior_[static_cast<std::size_t>(best)]) {
            best = c;
        }
    }
    return best;
}

namespace {

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (const std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    int n_classes;
    int n_features;
    const ForestHyperparams& hyper;
    int mtry;
    Rng rng;
    DecisionTree tree;

    int build(std::vector<std::size_t>& rows, int depth) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
        for (const std::size_t r : rows) counts[static_cast<std::size_t>(y[r])]++;

        const double node_gini = gini(counts, rows.size());
        const bool splittable = depth < hyper.max_depth && node_gini > 0.0 &&
                                rows.size() >= 2 * static_cast<std::size_t>(hyper.min_leaf);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 1e-12;

        if (splittable) {
            // distinct random feature subset, evaluated in ascending order
            std::vector<int> pool(static_cast<std::size_t>(n_features));
            std::iota(pool.begin(), pool.end(), 0);
            for (int k = 0; k < mtry; ++k) {
                const std::size_t j =
                    static_cast<std::size_t>(k) +
                    static_cast<std::size_t>(rng.next_index(
                        static_cast<std::uint64_t>(n_features - k)));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            }
            std::vector<int> feats(pool.begin(), pool.begin() + mtry);
            std::sort(feats.begin(), feats.end());

            std::vector<std::pair<double, int>> ordered(rows.size());
            std::vector<std::size_t> left_counts(static_cast<std::size_t>(n_classes));
            for (const int f : feats) {
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    ordered[i] = {x[rows[i]][static_cast<std::size_t>(f)], y[rows[i]]};
                }
                std::sort(ordered.begin(), ordered.end());
                std::fill(left_counts.begin(), left_counts.end(), 0);
                std::size_t left_n = 0;
                for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
                    left_counts[static_cast<std::size_t>(ordered[i].second)]++;
                    left_n++;
                    if (ordered[i].first == ordered[i + 1].first) continue;
                    const std::size_t right_n = ordered.size() - left_n;
                    if (left_n < static_cast<std::size_t>(hyper.min_leaf) ||
                        right_n < static_cast<std::size_t>(hyper.min_leaf)) {
                        continue;
                    }
                    double right_sq = 0.0;
                    double left_sq = 0.0;
                    for (int c = 0; c < n_classes; ++c) {
                        const double lc = static_cast<double>(left_counts[static_cast<std::size_t>(c)]);
                        const double rc = static_cast<double>(counts[static_cast<std::size_t>(c)]) - lc;
                        left_sq += lc * lc;
                        right_sq += rc * rc;
                    }
                    const double ln = static_cast<double>(left_n);
                    const double rn = static_cast<double>(right_n);
                    const double weighted =
                        (ln - left_sq / ln + rn - right_sq / rn) / (ln + rn);
                    const double gain = node_gini - weighted;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = f;
                        best_threshold = (ordered[i].first + ordered[i + 1].first) / 2.0;
                    }
                }
            }
        }

        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (best_feature < 0) {
            TreeNode& leaf = tree.nodes.back();
            leaf.distribution.resize(static_cast<std::size_t>(n_classes), 0.0);
            for (int c = 0; c < n_classes; ++c) {
                leaf.distribution[static_cast<std::size_t>(c)] =
                    static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                    static_cast<double>(rows.size());
            }
            return index;
        }

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (const std::size_t r : rows) {
            (x[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_rows
                                                                            : right_rows)
                .push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[static_cast<std::size_t>(index)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(index)].threshold = best_threshold;
        const int left = build(left_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        const int right = build(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }
};

DecisionTree build_tree(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                        int n_classes, int n_features, const ForestHyperparams& hyper,
                        int mtry, std::uint64_t tree_seed) {
    Rng rng(tree_seed);
    std::vector<std::size_t> rows(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        rows[i] = static_cast<std::size_t>(rng.next_index(x.size()));
    }
    TreeBuilder builder{x, y, n_classes, n_features, hyper, mtry, Rng(rng.next_u64()), {}};
    builder.build(rows, 0);
    return std::move(builder.tree);
}

} // namespace

ForestModel train_forest(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, int n_classes,
                         const ForestHyperparams& hyper, std::uint64_t seed) {
    if (features.empty() || labels.size() != features.size()) {
        throw ValidationError("empty_training_set",
                              "training needs matching, non-empty features and labels");
    }
    if (n_classes < 1) throw ValidationError("bad_classes", "n_classes must be positive");
    if (hyper.n_trees < 1 || hyper.max_depth < 1 || hyper.min_leaf < 1) {
        throw ValidationError("bad_hyperparams", "n_trees, max_depth, min_leaf must be >= 1");
    }
    const int n_features = static_cast<int>(features.front().size());
    if (n_features < 1) throw ValidationError("bad_features", "feature vectors are empty");
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (static_cast<int>(features[i].size()) != n_features) {
            throw ValidationError("bad_features", "row " + std::to_string(i) +
                                                      " has inconsistent feature length");
        }
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("bad_labels", "label out of range at row " +
                                                    std::to_string(i));
        }
    }

    ForestModel model;
    model.hyper_ = hyper;
    model.n_classes_ = n_classes;
    model.n_features_ = n_features;
    model.seed_ = seed;
    model.prior_.assign(static_cast<std::size_t>(n_classes), 0.0);
    for (const int l : labels) model.prior_[static_cast<std::size_t>(l)] += 1.0;
    for (double& p : model.prior_) p /= static_cast<double>(labels.size());

    int distinct = 0;
    for (int c = 0; c < n_classes; ++c) {
        if (model.prior_[static_cast<std::size_t>(c)] > 0.0) distinct++;
    }
    model.constant_warning_ = distinct < 2;

    const int mtry = hyper.feature_subsample > 0
                         ? std::min(hyper.feature_subsample, n_features)
                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_features))));

    model.trees_.resize(static_cast<std::size_t>(hyper.n_trees));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        std::min<unsigned>(hw, static_cast<unsigned>(hyper.n_trees));
    auto worker = [&](unsigned w) {
        for (int t = static_cast<int>(w); t < hyper.n_trees; t += static_cast<int>(workers)) {
            model.trees_[static_cast<std::size_t>(t)] =
                build_tree(features, labels, n_classes, n_features, hyper, mtry,
                           Rng::derive(seed, static_cast<std::uint64_t>(t)));
        }
    };
    if (workers <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(worker, w);
        for (auto& th : threads) th.join();
    }
    return model;
}

double cv_accuracy(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, int n_classes,
                   const ForestHyperparams& hyper, int folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("bad_folds", "cross validation needs >= 2 folds");
    if (features.size() < static_cast<std::size_t>(folds)) {
        throw ValidationError("bad_folds", "fewer rows than folds");
    }
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(seed, 0xCF01D));
    rng.shuffle(order);

    std::size_t correct = 0;
    for (int fold = 0; fold < folds; ++fold) {
        std::vector<std::vector<double>> train_x;
        std::vector<int> train_y;
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (static_cast<int>(i % static_cast<std::size_t>(folds)) == fold) {
                held.push_back(order[i]);
            } else {
                train_x.push_back(features[order[i]]);
                train_y.push_back(labels[order[i]]);
            }
        }
        const ForestModel model =
            train_forest(train_x, train_y, n_classes, hyper,
                         Rng::derive(seed, 0xF01D + static_cast<std::uint64_t>(fold)));
        for (const std::size_t i : held) {
            if (model.predict(features[i]) == labels[i]) correct++;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(features.size());
}

ForestHyperparams select_hyperparams(const std::vector<std::vector<double>>& features,
                                     const std::vector<int>& labels, int n_classes,
                                     std::uint64_t seed) {
    const int depths[] = {8, 12, 16};
    const int tree_counts[] = {25, 50};
    ForestHyperparams best;
    double best_acc = -1.0;
    for (const int depth : depths) {
        for (const int n_trees : tree_counts) {
            ForestHyperparams h;
            h.max_depth = depth;
            h.n_trees = n_trees;
            const double acc = cv_accuracy(features, labels, n_classes, h, 5, seed);
            if (acc > best_acc) {
                best_acc = acc;
                best = h;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json ForestModel::to_json() const {
    nlohmann::ordered_json j;
    j["n_trees"] = hyper_.n_trees;
    j["max_depth"] = hyper_.max_depth;
    j["min_leaf"] = hyper_.min_leaf;
    j["feature_subsample"] = hyper_.feature_subsample;
    j["n_classes"] = n_classes_;
    j["n_features"] = n_features_;
    j["seed"] = seed_;
    j["prior"] = prior_;
    j["constant_warning"] = constant_warning_;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                nodes.push_back({{"dist", n.distribution}});
            } else {
                nodes.push_back(
                    {{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
            }
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j;
}

ForestModel ForestModel::from_json(const nlohmann::ordered_json& j) {
    ForestModel m;
    try {
        m.hyper_.n_trees = j.at("n_trees").get<int>();
        m.hyper_.max_depth = j.at("max_depth").get<int>();
        m.hyper_.min_leaf = j.at("min_leaf").get<int>();
        m.hyper_.feature_subsample = j.at("feature_subsample").get<int>();
        m.n_classes_ = j.at("n_classes").get<int>();
        m.n_features_ = j.at("n_features").get<int>();
        m.seed_ = j.at("seed").get<std::uint64_t>();
        m.prior_ = j.at("prior").get<std::vector<double>>();
        m.constant_warning_ = j.at("constant_warning").get<bool>();
        for (const auto& tj : j.at("trees")) {
            DecisionTree tree;
            for (const auto& nj : tj.at("nodes")) {
                TreeNode n;
                if (nj.contains("dist")) {
                    n.distribution = nj.at("dist").get<std::vector<double>>();
                } else {
                    n.feature = nj.at("f").get<int>();
                    n.threshold = nj.at("t").get<double>();
                    n.left = nj.at("l").get<int>();
                    n.right = nj.at("r").get<int>();
                }
                tree.nodes.push_back(std::move(n));
            }
            m.trees_.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("forest_schema", e.what());
    }
    return m;
}

} // namespace pickwhy
