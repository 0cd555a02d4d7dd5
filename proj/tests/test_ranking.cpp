#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "pickwhy/ranking.hpp"
#include "pickwhy/rng.hpp"
#include "test_support.hpp"

using namespace pickwhy;
using pickwhy::testing::card_scene;
using pickwhy::testing::make_node;

namespace {

// Independent brute-force ranking oracle: vote the true label for every
// classifier slot over unordered pairs, then sort by rank with the
// documented tie key. Kept separate from the library implementation.
std::vector<RankedRelation> brute_force_rank(const SceneGraph& graph,
                                             const std::vector<RelationTriple>& subgraph,
                                             const std::set<RelationTriple>& causes) {
    std::vector<int> ranks(subgraph.size(), 0);
    for (std::size_t i = 0; i < subgraph.size(); ++i) {
        for (std::size_t j = i + 1; j < subgraph.size(); ++j) {
            const bool ci = causes.count(subgraph[i]) > 0;
            const bool cj = causes.count(subgraph[j]) > 0;
            for (int rep = 0; rep < 3; ++rep) {
                if (ci && !cj) {
                    ranks[i]++;
                } else if (!ci && cj) {
                    ranks[j]++;
                } else {
                    ranks[i]++;
                    ranks[j]++;
                }
            }
        }
    }
    std::vector<std::size_t> order(subgraph.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ranks[a] != ranks[b]) return ranks[a] > ranks[b];
        const auto& ta = subgraph[a];
        const auto& tb = subgraph[b];
        const auto pa = graph.predicates.index_of(ta.predicate).value_or(0);
        const auto pb = graph.predicates.index_of(tb.predicate).value_or(0);
        return std::tie(ta.subject, pa, ta.object) < std::tie(tb.subject, pb, tb.object);
    });
    std::vector<RankedRelation> out;
    for (const std::size_t i : order) out.push_back({subgraph[i], ranks[i]});
    return out;
}

// Random scene whose subgraph around node 0 has `n_relations` relations,
// with a random subset marked as causes.
struct RandomSubgraphCase {
    SceneGraph graph;
    std::vector<RelationTriple> subgraph;
    std::set<RelationTriple> causes;
};

RandomSubgraphCase random_case(Rng& rng, std::size_t n_relations) {
    RandomSubgraphCase c;
    c.graph.predicates = default_predicates();
    c.graph.attributes = default_attributes();
    const std::size_t n_nodes = n_relations + 1;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto attr =
            c.graph.attributes.name(rng.next_index(c.graph.attributes.size()));
        c.graph.nodes.push_back(
            make_node(static_cast<NodeId>(i), "obj" + std::to_string(i), attr,
                      10.0 * static_cast<double>(i), 5.0, 8.0, 8.0));
    }
    std::set<RelationTriple> used;
    while (c.subgraph.size() < n_relations) {
        RelationTriple t;
        const NodeId other = static_cast<NodeId>(1 + rng.next_index(n_nodes - 1));
        t.predicate = c.graph.predicates.name(rng.next_index(c.graph.predicates.size()));
        if (rng.next_bool(0.5)) {
            t.subject = 0;
            t.object = other;
        } else {
            t.subject = other;
            t.object = 0;
        }
        if (!used.insert(t).second) continue;
        c.graph.triples.push_back(t);
        c.subgraph.push_back(t);
        if (rng.next_bool(0.4)) c.causes.insert(t);
    }
    return c;
}

// Wraps a voter and counts votes by label, for the rank-conservation check.
class CountingVoter : public PairwiseVoter {
public:
    explicit CountingVoter(const PairwiseVoter& inner) : inner_(inner) {}
    int n_classifiers() const override { return inner_.n_classifiers(); }
    int vote(int c, const RelationTriple& rk, std::span<const double> fk,
             const RelationTriple& rm, std::span<const double> fm) const override {
        const int label = inner_.vote(c, rk, fk, rm, fm);
        total_++;
        if (label == 2) ties_++;
        return label;
    }
    mutable int total_ = 0;
    mutable int ties_ = 0;

private:
    const PairwiseVoter& inner_;
};

std::vector<double> onehot_relation(std::size_t pred, std::size_t ai, std::size_t aj) {
    const auto preds = default_predicates();
    const auto attrs = default_attributes();
    std::vector<double> f(preds.size() + 2 * attrs.size(), 0.0);
    f[pred] = 1.0;
    f[preds.size() + ai] = 1.0;
    f[preds.size() + attrs.size() + aj] = 1.0;
    return f;
}

} // namespace

TEST_CASE("relation features have exactly three hot bits") {
    const auto scene = card_scene();
    const auto f = relation_features(scene.graph, scene.graph.triples[0]);
    CHECK(f.size() ==
          scene.graph.predicates.size() + 2 * scene.graph.attributes.size());
    CHECK(std::count(f.begin(), f.end(), 1.0) == 3);
    CHECK(std::count(f.begin(), f.end(), 0.0) == static_cast<long>(f.size()) - 3);

    // predicate bit matches the vocabulary index
    const auto pred_index = *scene.graph.predicates.index_of("underneath");
    CHECK(f[pred_index] == 1.0);
}

TEST_CASE("training pairs label cause preference") {
    const auto scene = card_scene();
    const auto pairs = build_training_pairs(std::vector<FailureScenario>{scene});
    REQUIRE(pairs.size() == 1); // one unordered pair in a 2-relation subgraph
    CHECK(pairs[0].label == 0); // underneath grounds the cause, near does not

    // compound: both relations ground causes -> tie
    auto compound = scene;
    compound.causes.push_back(FailureCause::spatial({0, "near", 2}));
    compound.failure_type = FailureType::compound_spatial;
    const auto tied = build_training_pairs(std::vector<FailureScenario>{compound});
    REQUIRE(tied.size() == 1);
    CHECK(tied[0].label == 2);

    // neither grounds a cause -> also a tie
    auto attr_only = scene;
    attr_only.causes = {FailureCause::attr(0, "fragile")};
    attr_only.failure_type = FailureType::attribute;
    attr_only.graph.nodes[0].attribute = "fragile";
    const auto neither = build_training_pairs(std::vector<FailureScenario>{attr_only});
    REQUIRE(neither.size() == 1);
    CHECK(neither[0].label == 2);

    // empty subgraph contributes nothing
    FailureScenario isolated = attr_only;
    isolated.graph.triples.clear();
    isolated.causes = {FailureCause::attr(0, "fragile")};
    CHECK(build_training_pairs(std::vector<FailureScenario>{isolated}).empty());
}

TEST_CASE("pairwise_rank of a singleton subgraph is rank zero") {
    const auto scene = card_scene();
    const OracleVoter voter(scene);
    const std::vector<RelationTriple> one{scene.graph.triples[0]};
    const auto ranked = pairwise_rank(scene.graph, one, voter);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].rank == 0);
    CHECK(ranked[0].triple == one[0]);

    CHECK_THROWS_AS(pairwise_rank(scene.graph, {}, voter), ValidationError);
}

TEST_CASE("oracle ranking: one cause against two non-causes scores six") {
    SceneGraph g;
    g.predicates = default_predicates();
    g.attributes = default_attributes();
    for (NodeId id = 0; id < 4; ++id) {
        g.nodes.push_back(make_node(id, "obj" + std::to_string(id), kNoAttribute,
                                    12.0 * id, 6.0, 9.0, 9.0));
    }
    g.triples = {{0, "underneath", 1}, {0, "near", 2}, {0, "near", 3}};
    const std::set<RelationTriple> causes{{0, "underneath", 1}};
    const OracleVoter voter(causes);

    const auto ranked = rank_subgraph(g, 0, voter);
    REQUIRE(ranked.size() == 3);
    // two wins, each counted by all three classifiers
    CHECK(ranked[0].triple == RelationTriple{0, "underneath", 1});
    CHECK(ranked[0].rank == 6);
    CHECK(ranked[1].rank == 3); // the non-causes tie with each other
    CHECK(ranked[2].rank == 3);

    CHECK(pairwise_rank(g, g.triples, voter) ==
          brute_force_rank(g, g.triples, causes));
}

TEST_CASE("oracle ranking handles compound ties") {
    SceneGraph g;
    g.predicates = default_predicates();
    g.attributes = default_attributes();
    for (NodeId id = 0; id < 5; ++id) {
        g.nodes.push_back(make_node(id, "obj" + std::to_string(id), kNoAttribute,
                                    12.0 * id, 6.0, 9.0, 9.0));
    }
    g.triples = {{0, "underneath", 1}, {0, "in", 2}, {0, "near", 3}, {0, "near", 4}};
    const std::set<RelationTriple> causes{{0, "underneath", 1}, {0, "in", 2}};
    const OracleVoter voter(causes);
    const auto ranked = rank_subgraph(g, 0, voter);
    const auto top = top_ranked(ranked);
    REQUIRE(top.size() == 2);
    CHECK(std::set<RelationTriple>(top.begin(), top.end()) == causes);
    CHECK(ranked[0].rank == ranked[1].rank);
}

TEST_CASE("pairwise_rank equals brute force on 200 random subgraphs") {
    Rng rng(424242);
    for (int round = 0; round < 200; ++round) {
        const auto c = random_case(rng, 1 + rng.next_index(10));
        const OracleVoter voter(c.causes);
        const auto got = pairwise_rank(c.graph, c.subgraph, voter);
        const auto expected = brute_force_rank(c.graph, c.subgraph, c.causes);
        CHECK(got == expected);
    }
}

TEST_CASE("rank conservation: total increments equal votes plus ties") {
    Rng rng(777);
    for (int round = 0; round < 50; ++round) {
        const auto c = random_case(rng, 2 + rng.next_index(8));
        const OracleVoter oracle(c.causes);
        const CountingVoter counter(oracle);
        const auto ranked = pairwise_rank(c.graph, c.subgraph, counter);
        int total_rank = 0;
        for (const auto& r : ranked) total_rank += r.rank;
        CHECK(total_rank == counter.total_ + counter.ties_);
    }
}

TEST_CASE("ordered iteration doubles every rank for swap-consistent voters") {
    Rng rng(31337);
    for (int round = 0; round < 50; ++round) {
        const auto c = random_case(rng, 2 + rng.next_index(8));
        const OracleVoter voter(c.causes);
        const auto unordered = pairwise_rank(c.graph, c.subgraph, voter);
        const auto ordered =
            pairwise_rank(c.graph, c.subgraph, voter, PairIteration::ordered);
        REQUIRE(unordered.size() == ordered.size());
        for (std::size_t i = 0; i < unordered.size(); ++i) {
            CHECK(ordered[i].triple == unordered[i].triple);
            CHECK(ordered[i].rank == 2 * unordered[i].rank);
        }
    }
}

TEST_CASE("permuting the subgraph never changes the top-ranked set") {
    Rng rng(9009);
    for (int round = 0; round < 40; ++round) {
        const auto c = random_case(rng, 2 + rng.next_index(8));
        const OracleVoter voter(c.causes);
        const auto base_top = top_ranked(pairwise_rank(c.graph, c.subgraph, voter));
        auto permuted = c.subgraph;
        rng.shuffle(permuted);
        const auto new_top = top_ranked(pairwise_rank(c.graph, permuted, voter));
        CHECK(std::set<RelationTriple>(base_top.begin(), base_top.end()) ==
              std::set<RelationTriple>(new_top.begin(), new_top.end()));
    }
}

TEST_CASE("top_ranked keeps exactly the maximum-rank prefix") {
    const RelationTriple a{0, "on", 1};
    const RelationTriple b{0, "in", 2};
    const RelationTriple c{0, "near", 3};
    const RelationTriple d{0, "near", 4};

    const std::vector<RankedRelation> two_tops{{a, 6}, {b, 6}, {c, 2}, {d, 0}};
    CHECK(top_ranked(two_tops) == std::vector<RelationTriple>{a, b});

    const std::vector<RankedRelation> all_equal{{a, 3}, {b, 3}, {c, 3}};
    CHECK(top_ranked(all_equal).size() == 3);

    const std::vector<RankedRelation> single_head{{a, 5}, {b, 3}, {c, 3}};
    CHECK(top_ranked(single_head) == std::vector<RelationTriple>{a});

    CHECK_THROWS_AS(top_ranked(std::vector<RankedRelation>{}), ValidationError);
}

TEST_CASE("trained ranker: separable data gives perfect binary classifiers") {
    // cause relations always carry `underneath`, non-causes carry `near`
    const auto f_cause = onehot_relation(2, 0, 0); // underneath, none, none
    const auto f_noise = onehot_relation(3, 0, 0); // near, none, none
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 12; ++i) {
        pairs.push_back({f_cause, f_noise, 0});
        pairs.push_back({f_noise, f_cause, 1});
        pairs.push_back({f_noise, f_noise, 2});
        pairs.push_back({f_cause, f_cause, 2});
    }
    ForestHyperparams hyper;
    hyper.n_trees = 15;
    const auto ranker =
        train_ranker(pairs, hyper, 5, default_predicates(), default_attributes());

    // {0,1} classifier discriminates perfectly via 5-fold CV
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& p : pairs) {
        if (p.label > 1) continue;
        std::vector<double> row = p.first_features;
        row.insert(row.end(), p.second_features.begin(), p.second_features.end());
        x.push_back(row);
        y.push_back(p.label);
    }
    CHECK(cv_accuracy(x, y, 2, hyper, 5, 3) == doctest::Approx(1.0));

    // swapping arguments with a 0<->1 label swap leaves CV accuracy stable
    std::vector<std::vector<double>> x_swapped;
    std::vector<int> y_swapped;
    for (const auto& p : pairs) {
        if (p.label > 1) continue;
        std::vector<double> row = p.second_features;
        row.insert(row.end(), p.first_features.begin(), p.first_features.end());
        x_swapped.push_back(row);
        y_swapped.push_back(1 - p.label);
    }
    const double base = cv_accuracy(x, y, 2, hyper, 5, 3);
    const double swapped = cv_accuracy(x_swapped, y_swapped, 2, hyper, 5, 3);
    CHECK(std::abs(base - swapped) <= 0.02);

    // determinism
    const auto again =
        train_ranker(pairs, hyper, 5, default_predicates(), default_attributes());
    CHECK(again == ranker);
    CHECK(again.to_json().dump() == ranker.to_json().dump());
}

TEST_CASE("train_ranker names the label pair that lacks data") {
    const auto f_cause = onehot_relation(2, 0, 0);
    const auto f_noise = onehot_relation(3, 0, 0);
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 6; ++i) {
        pairs.push_back({f_cause, f_noise, 0});
        pairs.push_back({f_noise, f_noise, 2});
    }
    // labels {0,2} only: classifier {0,1} never sees a 1
    try {
        train_ranker(pairs, {}, 0, default_predicates(), default_attributes());
        FAIL("expected a missing-label-pair error");
    } catch (const ValidationError& e) {
        CHECK(e.code() == "missing_label_pair");
        CHECK(std::string(e.detail()).find("{0,1}") != std::string::npos);
    }
}

TEST_CASE("ranker ensembles round-trip through JSON") {
    const auto f_cause = onehot_relation(2, 0, 0);
    const auto f_noise = onehot_relation(3, 0, 0);
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 8; ++i) {
        pairs.push_back({f_cause, f_noise, 0});
        pairs.push_back({f_noise, f_cause, 1});
        pairs.push_back({f_noise, f_noise, 2});
    }
    ForestHyperparams hyper;
    hyper.n_trees = 5;
    hyper.max_depth = 4;
    const auto ranker =
        train_ranker(pairs, hyper, 2, default_predicates(), default_attributes());
    const auto restored = RankerEnsemble::from_json(ranker.to_json());
    CHECK(restored == ranker);

    auto bad = ranker.to_json();
    bad["format_version"] = 9;
    CHECK_THROWS_AS(RankerEnsemble::from_json(bad), ValidationError);
}
