#include "pickwhy/ranking.hpp"

#include <algorithm>

#include "pickwhy/rng.hpp"

namespace pickwhy {

std::size_t relation_feature_length(const Vocabulary& predicates,
                                    const Vocabulary& attributes) {
    return predicates.size() + 2 * attributes.size();
}

std::vector<double> relation_features(const SceneGraph& graph, const RelationTriple& t) {
    const auto pred = graph.predicates.index_of(t.predicate);
    if (!pred.has_value()) {
        throw ValidationError("unknown_predicate", t.predicate);
    }
    const SceneNode& subject = graph.node(t.subject);
    const SceneNode& object = graph.node(t.object);
    const auto a_i = graph.attributes.index_of(subject.attribute);
    const auto a_j = graph.attributes.index_of(object.attribute);
    if (!a_i.has_value() || !a_j.has_value()) {
        throw ValidationError("unknown_attribute", "relation endpoints carry attributes "
                                                   "outside the vocabulary");
    }
    std::vector<double> f(relation_feature_length(graph.predicates, graph.attributes), 0.0);
    f[*pred] = 1.0;
    f[graph.predicates.size() + *a_i] = 1.0;
    f[graph.predicates.size() + graph.attributes.size() + *a_j] = 1.0;
    return f;
}

bool grounds_cause(const FailureScenario& scenario, const RelationTriple& t) {
    for (const auto& c : scenario.causes) {
        if (c.kind == CauseKind::spatial && c.triple == t) return true;
    }
    return false;
}

int preference_label(bool k_is_cause, bool m_is_cause) {
    if (k_is_cause && !m_is_cause) return 0;
    if (!k_is_cause && m_is_cause) return 1;
    return 2; // both or neither
}

std::vector<PreferencePair> build_training_pairs(
    std::span<const FailureScenario> scenarios) {
    std::vector<PreferencePair> pairs;
    for (const auto& scenario : scenarios) {
        const auto subgraph = triples_containing(scenario.graph, scenario.desired_object);
        std::vector<std::vector<double>> features;
        features.reserve(subgraph.size());
        for (const auto& t : subgraph) {
            features.push_back(relation_features(scenario.graph, t));
        }
        for (std::size_t k = 0; k < subgraph.size(); ++k) {
            for (std::size_t m = k + 1; m < subgraph.size(); ++m) {
                PreferencePair p;
                p.first_features = features[k];
                p.second_features = features[m];
                p.label = preference_label(grounds_cause(scenario, subgraph[k]),
                                           grounds_cause(scenario, subgraph[m]));
                pairs.push_back(std::move(p));
            }
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Voters
// ---------------------------------------------------------------------------

OracleVoter::OracleVoter(const FailureScenario& scenario) {
    for (const auto& c : scenario.causes) {
        if (c.kind == CauseKind::spatial) causes_.insert(c.triple);
    }
}

OracleVoter::OracleVoter(std::set<RelationTriple> cause_triples)
    : causes_(std::move(cause_triples)) {}

int OracleVoter::vote(int, const RelationTriple& rk, std::span<const double>,
                      const RelationTriple& rm, std::span<const double>) const {
    return preference_label(causes_.count(rk) > 0, causes_.count(rm) > 0);
}

RankerEnsemble::RankerEnsemble(Vocabulary predicates, Vocabulary attributes,
                               std::array<ForestModel, 3> classifiers)
    : predicates_(std::move(predicates)),
      attributes_(std::move(attributes)),
      classifiers_(std::move(classifiers)) {}

int RankerEnsemble::vote(int classifier, const RelationTriple&, std::span<const double> fk,
                         const RelationTriple&, std::span<const double> fm) const {
    std::vector<double> input;
    input.reserve(fk.size() + fm.size());
    input.insert(input.end(), fk.begin(), fk.end());
    input.insert(input.end(), fm.begin(), fm.end());
    const int binary = classifiers_[static_cast<std::size_t>(classifier)].predict(input);
    const auto [lo, hi] = kLabelPairs[static_cast<std::size_t>(classifier)];
    return binary == 0 ? lo : hi;
}

RankerEnsemble train_ranker(std::span<const PreferencePair> pairs,
                            const ForestHyperparams& hyper, std::uint64_t seed,
                            Vocabulary predicates, Vocabulary attributes) {
    std::array<ForestModel, 3> classifiers;
    for (std::size_t c = 0; c < RankerEnsemble::kLabelPairs.size(); ++c) {
        const auto [lo, hi] = RankerEnsemble::kLabelPairs[c];
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& p : pairs) {
            if (p.label != lo && p.label != hi) continue;
            std::vector<double> row;
            row.reserve(p.first_features.size() + p.second_features.size());
            row.insert(row.end(), p.first_features.begin(), p.first_features.end());
            row.insert(row.end(), p.second_features.begin(), p.second_features.end());
            x.push_back(std::move(row));
            y.push_back(p.label == lo ? 0 : 1);
        }
        const auto lo_rows = static_cast<std::size_t>(std::count(y.begin(), y.end(), 0));
        if (lo_rows == 0 || lo_rows == y.size()) {
            throw ValidationError("missing_label_pair",
                                  "no training pairs for classifier {" +
                                      std::to_string(lo) + "," + std::to_string(hi) +
                                      "} with label " + std::to_string(lo_rows == 0 ? lo : hi));
        }
        classifiers[c] = train_forest(x, y, 2, hyper, Rng::derive(seed, c));
    }
    return RankerEnsemble(std::move(predicates), std::move(attributes),
                          std::move(classifiers));
}

// ---------------------------------------------------------------------------
// Algorithm: vote over relation pairs, increment ranks, sort.
// ---------------------------------------------------------------------------

std::vector<RankedRelation> pairwise_rank(const SceneGraph& graph,
                                          std::span<const RelationTriple> subgraph,
                                          const PairwiseVoter& voter,
                                          PairIteration iteration) {
    if (subgraph.empty()) {
        throw ValidationError("empty_subgraph", "there is nothing to rank");
    }
    std::vector<std::vector<double>> features;
    features.reserve(subgraph.size());
    for (const auto& t : subgraph) {
        features.push_back(relation_features(graph, t));
    }

    std::vector<int> ranks(subgraph.size(), 0);
    auto run_pair = [&](std::size_t k, std::size_t m) {
        for (int c = 0; c < voter.n_classifiers(); ++c) {
            const int label =
                voter.vote(c, subgraph[k], features[k], subgraph[m], features[m]);
            if (label == 0) {
                ranks[k]++;
            } else if (label == 1) {
                ranks[m]++;
            } else if (label == 2) {
                ranks[k]++;
                ranks[m]++;
            } else {
                throw ValidationError("bad_vote", "classifier voted outside {0,1,2}");
            }
        }
    };
    for (std::size_t k = 0; k < subgraph.size(); ++k) {
        for (std::size_t m = k + 1; m < subgraph.size(); ++m) {
            run_pair(k, m);
            if (iteration == PairIteration::ordered) run_pair(m, k);
        }
    }

    std::vector<RankedRelation> out;
    out.reserve(subgraph.size());
    for (std::size_t i = 0; i < subgraph.size(); ++i) {
        out.push_back({subgraph[i], ranks[i]});
    }
    std::sort(out.begin(), out.end(), [&graph](const RankedRelation& a, const RankedRelation& b) {
        if (a.rank != b.rank) return a.rank > b.rank;
        const auto pa = graph.predicates.index_of(a.triple.predicate).value_or(0);
        const auto pb = graph.predicates.index_of(b.triple.predicate).value_or(0);
        return std::tie(a.triple.subject, pa, a.triple.object) <
               std::tie(b.triple.subject, pb, b.triple.object);
    });
    return out;
}

std::vector<RankedRelation> rank_subgraph(const SceneGraph& graph, NodeId desired_object,
                                          const PairwiseVoter& voter,
                                          PairIteration iteration) {
    return pairwise_rank(graph, triples_containing(graph, desired_object), voter, iteration);
}

std::vector<RelationTriple> top_ranked(std::span<const RankedRelation> ranked) {
    if (ranked.empty()) {
        throw ValidationError("empty_ranking", "an empty ranking has no top entries");
    }
    const int top = ranked.front().rank;
    std::vector<RelationTriple> out;
    for (const auto& r : ranked) {
        if (r.rank == top) out.push_back(r.triple);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

OrderedJson RankerEnsemble::to_json() const {
    OrderedJson j;
    j["format_version"] = 1;
    j["kind"] = "ranker";
    j["predicates"] = predicates_.names();
    j["attributes"] = attributes_.names();
    OrderedJson cls = OrderedJson::array();
    for (std::size_t c = 0; c < kLabelPairs.size(); ++c) {
        OrderedJson entry;
        entry["labels"] = OrderedJson::array({kLabelPairs[c].first, kLabelPairs[c].second});
        entry["forest"] = classifiers_[c].to_json();
        cls.push_back(std::move(entry));
    }
    j["classifiers"] = std::move(cls);
    return j;
}

RankerEnsemble RankerEnsemble::from_json(const OrderedJson& j) {
    check_format_version(j, 1, "ranker");
    if (!j.contains("kind") || j.at("kind") != "ranker") {
        throw ValidationError("model_schema", "not a ranker file");
    }
    RankerEnsemble r;
    try {
        r.predicates_ = Vocabulary(j.at("predicates").get<std::vector<std::string>>());
        r.attributes_ = Vocabulary(j.at("attributes").get<std::vector<std::string>>());
        const auto& cls = j.at("classifiers");
        if (!cls.is_array() || cls.size() != kLabelPairs.size()) {
            throw ValidationError("model_schema", "a ranker bundles exactly 3 classifiers");
        }
        for (std::size_t c = 0; c < kLabelPairs.size(); ++c) {
            const auto& entry = cls[c];
            if (entry.at("labels")[0].get<int>() != kLabelPairs[c].first ||
                entry.at("labels")[1].get<int>() != kLabelPairs[c].second) {
                throw ValidationError("model_schema", "unexpected label pair order");
            }
            r.classifiers_[c] = ForestModel::from_json(entry.at("forest"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model_schema", e.what());
    }
    return r;
}

void save_ranker(const RankerEnsemble& ranker, const std::filesystem::path& path) {
    write_json_file(path, ranker.to_json());
}

RankerEnsemble load_ranker(const std::filesystem::path& path) {
    return RankerEnsemble::from_json(read_json_file(path));
}

} // namespace pickwhy
