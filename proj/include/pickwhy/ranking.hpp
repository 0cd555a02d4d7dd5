#pragma once

#include <array>
#include <memory>
#include <set>
#include <span>
#include <vector>

#include "pickwhy/forest.hpp"
#include "pickwhy/scene_json.hpp"
#include "pickwhy/scene_model.hpp"
#include "pickwhy/synthetic_scenes.hpp"

namespace pickwhy {

// Pairwise preference ranking of the relations around a desired object.
// A relation is described by one-hot(predicate) ++ one-hot(subject attribute)
// ++ one-hot(object attribute). For a pair of relations (r_k, r_m) three
// one-vs-one classifiers vote with labels
//   0: r_k better explains the failure,
//   1: r_m better explains it,
//   2: both do equally (or neither does),
// and each vote increments the rank of r_k, r_m, or both.

enum class PreferenceLabel : int { first = 0, second = 1, tie = 2 };

std::size_t relation_feature_length(const Vocabulary& predicates,
                                    const Vocabulary& attributes);
std::vector<double> relation_features(const SceneGraph& graph, const RelationTriple& t);

// True iff the triple grounds one of the scenario's spatial causes.
bool grounds_cause(const FailureScenario& scenario, const RelationTriple& t);

// The ternary preference between two relations given ground-truth causes.
int preference_label(bool k_is_cause, bool m_is_cause);

struct PreferencePair {
    std::vector<double> first_features;
    std::vector<double> second_features;
    int label = 0; // 0, 1 or 2
};

// One row per unordered relation pair of every scenario's subgraph.
std::vector<PreferencePair> build_training_pairs(std::span<const FailureScenario> scenarios);

// Abstract voter: classifier `index` (of the 3) votes 0, 1 or 2 for the pair.
// Trained ensembles look only at the features; test oracles may look at the
// triples themselves.
class PairwiseVoter {
public:
    virtual ~PairwiseVoter() = default;
    virtual int n_classifiers() const = 0;
    virtual int vote(int classifier, const RelationTriple& rk, std::span<const double> fk,
                     const RelationTriple& rm, std::span<const double> fm) const = 0;
};

// Votes the true preference label from a set of cause triples, for every
// classifier slot. With three slots every win counts 3 ranks.
class OracleVoter : public PairwiseVoter {
public:
    explicit OracleVoter(const FailureScenario& scenario);
    explicit OracleVoter(std::set<RelationTriple> cause_triples);

    int n_classifiers() const override { return 3; }
    int vote(int classifier, const RelationTriple& rk, std::span<const double> fk,
             const RelationTriple& rm, std::span<const double> fm) const override;

private:
    std::set<RelationTriple> causes_;
};

// Three binary forests, one per label pair {0,1}, {0,2}, {1,2}; each votes
// only its own two labels. Input is concat(f_k, f_m).
class RankerEnsemble : public PairwiseVoter {
public:
    static constexpr std::array<std::pair<int, int>, 3> kLabelPairs{
        {{0, 1}, {0, 2}, {1, 2}}};

    RankerEnsemble() = default;
    RankerEnsemble(Vocabulary predicates, Vocabulary attributes,
                   std::array<ForestModel, 3> classifiers);

    int n_classifiers() const override { return 3; }
    int vote(int classifier, const RelationTriple& rk, std::span<const double> fk,
             const RelationTriple& rm, std::span<const double> fm) const override;

    const Vocabulary& predicates() const { return predicates_; }
    const Vocabulary& attributes() const { return attributes_; }
    const std::array<ForestModel, 3>& classifiers() const { return classifiers_; }

    OrderedJson to_json() const; // format_version 1
    static RankerEnsemble from_json(const OrderedJson& j);

    bool operator==(const RankerEnsemble& other) const {
        return predicates_ == other.predicates_ && attributes_ == other.attributes_ &&
               classifiers_ == other.classifiers_;
    }

private:
    Vocabulary predicates_;
    Vocabulary attributes_;
    std::array<ForestModel, 3> classifiers_;
};

// Trains the three one-vs-one classifiers. Throws
// ValidationError("missing_label_pair") naming any pair with no data.
RankerEnsemble train_ranker(std::span<const PreferencePair> pairs,
                            const ForestHyperparams& hyper, std::uint64_t seed,
                            Vocabulary predicates, Vocabulary attributes);

// The loop over relation pairs. `unordered` visits each pair once (k < m);
// `ordered` visits both orientations, which doubles every increment when the
// classifiers are argument-swap consistent.
enum class PairIteration { unordered, ordered };

struct RankedRelation {
    RelationTriple triple;
    int rank = 0;

    bool operator==(const RankedRelation&) const = default;
};

// Sorted by rank descending, ties by (subject, predicate index, object).
// Throws ValidationError("empty_subgraph") when the subgraph is empty.
std::vector<RankedRelation> pairwise_rank(const SceneGraph& graph,
                                          std::span<const RelationTriple> subgraph,
                                          const PairwiseVoter& voter,
                                          PairIteration iteration = PairIteration::unordered);

// Convenience: subgraph = all triples containing the desired object.
std::vector<RankedRelation> rank_subgraph(const SceneGraph& graph, NodeId desired_object,
                                          const PairwiseVoter& voter,
                                          PairIteration iteration = PairIteration::unordered);

// Every relation sharing the maximum rank, in ranked order. Never empty;
// throws ValidationError("empty_ranking") on empty input.
std::vector<RelationTriple> top_ranked(std::span<const RankedRelation> ranked);

void save_ranker(const RankerEnsemble& ranker, const std::filesystem::path& path);
RankerEnsemble load_ranker(const std::filesystem::path& path);

} // namespace pickwhy
