#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pickwhy/forest.hpp"
#include "pickwhy/rng.hpp"

using namespace pickwhy;

namespace {

// Box-Muller, driven by the deterministic Rng.
double gaussian(Rng& rng, double mean, double stddev) {
    const double u1 = rng.next_double() + 1e-12;
    const double u2 = rng.next_double();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
}

struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
};

Dataset separable_two_class(std::size_t n) {
    Dataset d;
    Rng rng(5);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.next_double(-1.0, 1.0);
        const double noise = rng.next_double(-1.0, 1.0);
        d.x.push_back({v, noise});
        d.y.push_back(v <= 0.0 ? 0 : 1);
    }
    return d;
}

Dataset three_blobs(std::size_t per_class) {
    Dataset d;
    Rng rng(17);
    const double centers[3][2] = {{0.0, 0.0}, {6.0, 0.0}, {0.0, 6.0}};
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            d.x.push_back({gaussian(rng, centers[c][0], 0.8),
                           gaussian(rng, centers[c][1], 0.8)});
            d.y.push_back(c);
        }
    }
    return d;
}

double training_accuracy(const ForestModel& model, const Dataset& d) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        if (model.predict(d.x[i]) == d.y[i]) hits++;
    }
    return static_cast<double>(hits) / static_cast<double>(d.x.size());
}

} // namespace

TEST_CASE("a linearly separable problem trains to 100 percent") {
    const auto d = separable_two_class(100);
    ForestHyperparams hyper;
    hyper.n_trees = 20;
    const auto model = train_forest(d.x, d.y, 2, hyper, 3);
    CHECK(training_accuracy(model, d) == doctest::Approx(1.0));
    CHECK_FALSE(model.constant_warning());
}

TEST_CASE("training is deterministic per seed and serializes identically") {
    const auto d = separable_two_class(60);
    ForestHyperparams hyper;
    hyper.n_trees = 15;
    const auto a = train_forest(d.x, d.y, 2, hyper, 11);
    const auto b = train_forest(d.x, d.y, 2, hyper, 11);
    CHECK(a == b);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const auto c = train_forest(d.x, d.y, 2, hyper, 12);
    CHECK(a.to_json().dump() != c.to_json().dump());
}

TEST_CASE("growing the forest keeps earlier trees unchanged") {
    const auto d = separable_two_class(60);
    ForestHyperparams small;
    small.n_trees = 10;
    ForestHyperparams big;
    big.n_trees = 25;
    const auto m_small = train_forest(d.x, d.y, 2, small, 4);
    const auto m_big = train_forest(d.x, d.y, 2, big, 4);
    for (std::size_t t = 0; t < m_small.trees().size(); ++t) {
        CHECK(m_small.trees()[t] == m_big.trees()[t]);
    }
}

TEST_CASE("one-class input trains a constant model with a warning") {
    std::vector<std::vector<double>> x{{0.0}, {1.0}, {2.0}, {3.0}};
    std::vector<int> y{1, 1, 1, 1};
    const auto model = train_forest(x, y, 3, {}, 0);
    CHECK(model.constant_warning());
    CHECK(model.predict(std::vector<double>{5.0}) == 1);
    CHECK(model.predict(std::vector<double>{-9.0}) == 1);
    CHECK(model.prior_class() == 1);
}

TEST_CASE("empty training data is an error") {
    CHECK_THROWS_AS(train_forest({}, {}, 2, {}, 0), ValidationError);
}

TEST_CASE("three gaussian blobs cross-validate above 0.9") {
    const auto d = three_blobs(60);
    ForestHyperparams hyper;
    hyper.n_trees = 25;
    hyper.max_depth = 8;
    const double acc = cv_accuracy(d.x, d.y, 3, hyper, 5, 9);
    CHECK(acc > 0.9);
    CHECK(cv_accuracy(d.x, d.y, 3, hyper, 5, 9) == doctest::Approx(acc));
}

TEST_CASE("prediction is invariant to tree order") {
    const auto d = three_blobs(40);
    const auto model = train_forest(d.x, d.y, 3, {}, 2);

    auto j = model.to_json();
    auto trees = j["trees"];
    std::reverse(trees.begin(), trees.end());
    j["trees"] = trees;
    const auto reversed = ForestModel::from_json(j);

    Rng rng(33);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> probe{rng.next_double(-3.0, 9.0),
                                        rng.next_double(-3.0, 9.0)};
        CHECK(model.predict(probe) == reversed.predict(probe));
    }
}

TEST_CASE("serialization round-trips exactly") {
    const auto d = three_blobs(30);
    const auto model = train_forest(d.x, d.y, 3, {}, 8);
    const auto restored = ForestModel::from_json(model.to_json());
    CHECK(restored == model);
    CHECK(restored.to_json().dump() == model.to_json().dump());
}

TEST_CASE("training accuracy is at least the majority-class baseline") {
    Rng rng(77);
    Dataset d;
    for (int i = 0; i < 300; ++i) {
        d.x.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
        d.y.push_back(rng.next_bool(0.7) ? 0 : 1); // labels independent of features
    }
    std::size_t majority = 0;
    for (const int label : d.y) majority += label == 0 ? 1 : 0;
    const double baseline =
        static_cast<double>(std::max(majority, d.y.size() - majority)) /
        static_cast<double>(d.y.size());
    const auto model = train_forest(d.x, d.y, 2, {}, 0);
    CHECK(training_accuracy(model, d) >= baseline - 1e-12);
}

TEST_CASE("hyperparameter selection returns a grid member") {
    const auto d = three_blobs(20);
    const auto h = select_hyperparams(d.x, d.y, 3, 1);
    const bool depth_ok = h.max_depth == 8 || h.max_depth == 12 || h.max_depth == 16;
    const bool trees_ok = h.n_trees == 25 || h.n_trees == 50;
    CHECK(depth_ok);
    CHECK(trees_ok);
}
