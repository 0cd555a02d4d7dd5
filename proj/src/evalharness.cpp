#include "pickwhy/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "pickwhy/rng.hpp"

namespace pickwhy {

std::string to_string(const SolutionAction& a) {
    switch (a.kind) {
        case SolutionAction::Kind::remove_occluder:
            return "remove_occluder(" + std::to_string(a.target) + ")";
        case SolutionAction::Kind::open_container:
            return "open_container(" + std::to_string(a.target) + ")";
        case SolutionAction::Kind::handle_with_care: return "handle_with_care";
        case SolutionAction::Kind::get_help_for_heavy: return "get_help_for_heavy";
        case SolutionAction::Kind::wait_to_cool: return "wait_to_cool";
        case SolutionAction::Kind::none_needed: return "none_needed";
    }
    throw ValidationError("bad_action", "unrepresentable enum value");
}

namespace {

template <class T>
double overlap_f1(std::span<const T> selected, std::span<const T> truth) {
    if (truth.empty()) {
        throw ValidationError("empty_truth", "scoring needs a non-empty truth set");
    }
    const std::set<T> sel(selected.begin(), selected.end());
    const std::set<T> tru(truth.begin(), truth.end());
    if (sel.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : sel) hits += tru.count(s);
    if (hits == 0) return 0.0;
    const double precision = static_cast<double>(hits) / static_cast<double>(sel.size());
    const double recall = static_cast<double>(hits) / static_cast<double>(tru.size());
    return 2.0 * precision * recall / (precision + recall);
}

template <class T>
double overlap_recall(std::span<const T> selected, std::span<const T> truth) {
    if (truth.empty()) {
        throw ValidationError("empty_truth", "scoring needs a non-empty truth set");
    }
    const std::set<T> sel(selected.begin(), selected.end());
    const std::set<T> tru(truth.begin(), truth.end());
    std::size_t hits = 0;
    for (const auto& t : tru) hits += sel.count(t);
    return static_cast<double>(hits) / static_cast<double>(tru.size());
}

} // namespace

double f1_score(std::span<const FailureCause> selected, std::span<const FailureCause> truth) {
    return overlap_f1(selected, truth);
}

double recall_score(std::span<const FailureCause> selected,
                    std::span<const FailureCause> truth) {
    return overlap_recall(selected, truth);
}

double f1_score(std::span<const SolutionAction> selected,
                std::span<const SolutionAction> truth) {
    return overlap_f1(selected, truth);
}

double recall_score(std::span<const SolutionAction> selected,
                    std::span<const SolutionAction> truth) {
    return overlap_recall(selected, truth);
}

namespace {

SolutionAction remedy_for_attribute(const std::string& attribute) {
    SolutionAction a;
    if (attribute == "heavy") {
        a.kind = SolutionAction::Kind::get_help_for_heavy;
    } else if (attribute == "hot") {
        a.kind = SolutionAction::Kind::wait_to_cool;
    } else {
        a.kind = SolutionAction::Kind::handle_with_care; // fragile and anything else
    }
    return a;
}

// The action a responder infers from believing a relation blocks the pick.
SolutionAction action_for_relation(const RelationTriple& t, NodeId desired) {
    SolutionAction a;
    if (t.predicate == "underneath" && t.subject == desired) {
        a.kind = SolutionAction::Kind::remove_occluder;
        a.target = t.object;
    } else if (t.predicate == "on" && t.object == desired) {
        a.kind = SolutionAction::Kind::remove_occluder;
        a.target = t.subject;
    } else if ((t.predicate == "in" || t.predicate == "inside") && t.subject == desired) {
        a.kind = SolutionAction::Kind::open_container;
        a.target = t.object;
    } else {
        a.kind = SolutionAction::Kind::remove_occluder;
        a.target = t.subject == desired ? t.object : t.subject;
    }
    return a;
}

void dedupe_causes(std::vector<FailureCause>& v) {
    std::vector<FailureCause> out;
    for (const auto& c : v) {
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    v = std::move(out);
}

void dedupe_actions(std::vector<SolutionAction>& v) {
    std::vector<SolutionAction> out;
    for (const auto& a : v) {
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    }
    v = std::move(out);
}

} // namespace

std::vector<SolutionAction> ground_truth_solutions(const FailureScenario& scenario) {
    std::vector<SolutionAction> actions;
    for (const auto& c : scenario.causes) {
        if (c.kind == CauseKind::spatial) {
            SolutionAction a;
            if (c.triple.predicate == "underneath") {
                a.kind = SolutionAction::Kind::remove_occluder;
                a.target = c.triple.object;
            } else {
                a.kind = SolutionAction::Kind::open_container;
                a.target = c.triple.object;
            }
            actions.push_back(a);
        } else {
            actions.push_back(remedy_for_attribute(c.attribute));
        }
    }
    dedupe_actions(actions);
    return actions;
}

ResponderPolicy responder_policy_from_string(std::string_view s) {
    if (s == "oracle") return ResponderPolicy::oracle;
    if (s == "random-k" || s == "random_k") return ResponderPolicy::random_k;
    if (s == "literal" || s == "literal-text-parser") {
        return ResponderPolicy::literal_text_parser;
    }
    throw ValidationError("bad_policy", std::string(s));
}

std::string to_string(ResponderPolicy p) {
    switch (p) {
        case ResponderPolicy::oracle: return "oracle";
        case ResponderPolicy::random_k: return "random-k";
        case ResponderPolicy::literal_text_parser: return "literal-text-parser";
    }
    throw ValidationError("bad_policy", "unrepresentable enum value");
}

namespace {

ResponseRecord respond_oracle(const FailureScenario& scenario,
                              const Explanation& explanation) {
    ResponseRecord r;
    for (const auto& t : explanation.supporting_relations) {
        r.selected_causes.push_back(FailureCause::spatial(t));
        r.selected_solutions.push_back(action_for_relation(t, scenario.desired_object));
    }
    if (explanation.attribute_mentioned.has_value()) {
        r.selected_causes.push_back(
            FailureCause::attr(scenario.desired_object, *explanation.attribute_mentioned));
        r.selected_solutions.push_back(remedy_for_attribute(*explanation.attribute_mentioned));
    }
    return r;
}

ResponseRecord respond_random_k(const FailureScenario& scenario, std::uint64_t seed) {
    ResponseRecord r;
    const auto subgraph = triples_containing(scenario.graph, scenario.desired_object);
    std::vector<FailureCause> candidates;
    for (const auto& t : subgraph) candidates.push_back(FailureCause::spatial(t));
    const SceneNode& d = scenario.graph.node(scenario.desired_object);
    if (d.attribute != kNoAttribute) {
        candidates.push_back(FailureCause::attr(d.id, d.attribute));
    }
    if (candidates.empty()) return r;
    Rng rng(seed);
    const std::size_t k =
        std::min<std::size_t>(candidates.size(), rng.next_index(4)); // 0..3
    rng.shuffle(candidates);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = candidates[i];
        r.selected_causes.push_back(c);
        if (c.kind == CauseKind::spatial) {
            r.selected_solutions.push_back(
                action_for_relation(c.triple, scenario.desired_object));
        } else {
            r.selected_solutions.push_back(remedy_for_attribute(c.attribute));
        }
    }
    return r;
}

std::vector<std::string> split_reason_phrases(const std::string& text) {
    const std::string marker = " because ";
    const auto at = text.find(marker);
    if (at == std::string::npos) return {};
    std::string tail = text.substr(at + marker.size());
    if (!tail.empty() && tail.back() == '.') tail.pop_back();

    std::vector<std::string> phrases;
    std::size_t start = 0;
    for (;;) {
        const auto comma = tail.find(", ", start);
        if (comma == std::string::npos) break;
        phrases.push_back(tail.substr(start, comma - start));
        start = comma + 2;
    }
    std::string last = tail.substr(start);
    const auto and_at = last.rfind(" and ");
    if (and_at != std::string::npos) {
        phrases.push_back(last.substr(0, and_at));
        phrases.push_back(last.substr(and_at + 5));
    } else if (!last.empty()) {
        phrases.push_back(last);
    }
    return phrases;
}

ResponseRecord respond_literal(const FailureScenario& scenario,
                               const Explanation& explanation,
                               const PhraseLexicon& lexicon) {
    ResponseRecord r;
    const SceneNode& d = scenario.graph.node(scenario.desired_object);
    for (const auto& phrase : split_reason_phrases(explanation.text)) {
        bool matched = false;
        for (const auto& t : scenario.graph.triples) {
            if (render_relation(t, lexicon, scenario.graph) == phrase) {
                r.selected_causes.push_back(FailureCause::spatial(t));
                r.selected_solutions.push_back(
                    action_for_relation(t, scenario.desired_object));
                matched = true;
                break;
            }
        }
        if (matched) continue;
        for (const auto& n : scenario.graph.nodes) {
            if (n.attribute != kNoAttribute &&
                render_attribute(n, lexicon) == phrase) {
                r.selected_causes.push_back(FailureCause::attr(n.id, n.attribute));
                r.selected_solutions.push_back(remedy_for_attribute(n.attribute));
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (phrase == "the " + d.label + " is occluded") {
            // coarse category: take the first occlusion relation
            for (const auto& t : scenario.graph.triples) {
                if (t.subject == d.id && t.predicate == "underneath") {
                    r.selected_causes.push_back(FailureCause::spatial(t));
                    r.selected_solutions.push_back(
                        action_for_relation(t, scenario.desired_object));
                    break;
                }
            }
        } else if (phrase == "the " + d.label + " is in a closed container") {
            for (const auto& t : scenario.graph.triples) {
                if (t.subject == d.id && (t.predicate == "in" || t.predicate == "inside")) {
                    r.selected_causes.push_back(FailureCause::spatial(t));
                    r.selected_solutions.push_back(
                        action_for_relation(t, scenario.desired_object));
                    break;
                }
            }
        }
        // "cannot be picked" and anything unparseable select nothing
    }
    dedupe_causes(r.selected_causes);
    dedupe_actions(r.selected_solutions);
    return r;
}

} // namespace

ResponseRecord simulate_responder(const FailureScenario& scenario,
                                  const Explanation& explanation, ResponderPolicy policy,
                                  std::uint64_t seed, const PhraseLexicon& lexicon) {
    ResponseRecord r;
    switch (policy) {
        case ResponderPolicy::oracle: r = respond_oracle(scenario, explanation); break;
        case ResponderPolicy::random_k: r = respond_random_k(scenario, seed); break;
        case ResponderPolicy::literal_text_parser:
            r = respond_literal(scenario, explanation, lexicon);
            break;
    }
    dedupe_causes(r.selected_causes);
    dedupe_actions(r.selected_solutions);
    return r;
}

std::string to_string(Condition c) {
    switch (c) {
        case Condition::none: return "none";
        case Condition::cb: return "cb";
        case Condition::ssg: return "ssg";
        case Condition::ssg_r: return "ssg_r";
    }
    throw ValidationError("bad_condition", "unrepresentable enum value");
}

Condition condition_from_string(std::string_view s) {
    if (s == "none") return Condition::none;
    if (s == "cb") return Condition::cb;
    if (s == "ssg") return Condition::ssg;
    if (s == "ssg_r" || s == "ssg-r") return Condition::ssg_r;
    throw ValidationError("bad_condition", std::string(s));
}

RankerFactory oracle_ranker_factory() {
    return [](const FailureScenario& scenario) -> std::unique_ptr<PairwiseVoter> {
        return std::make_unique<OracleVoter>(scenario);
    };
}

RankerFactory fixed_ranker_factory(std::shared_ptr<const RankerEnsemble> ranker) {
    return [ranker](const FailureScenario&) -> std::unique_ptr<PairwiseVoter> {
        struct Shared : PairwiseVoter {
            std::shared_ptr<const RankerEnsemble> inner;
            explicit Shared(std::shared_ptr<const RankerEnsemble> r) : inner(std::move(r)) {}
            int n_classifiers() const override { return inner->n_classifiers(); }
            int vote(int c, const RelationTriple& rk, std::span<const double> fk,
                     const RelationTriple& rm, std::span<const double> fm) const override {
                return inner->vote(c, rk, fk, rm, fm);
            }
        };
        return std::make_unique<Shared>(ranker);
    };
}

double ScenarioScore::fid_score() const {
    return failure_type == FailureType::compound_spatial ? fid_recall : fid_f1;
}

double ScenarioScore::sid_score() const {
    return failure_type == FailureType::compound_spatial ? sid_recall : sid_f1;
}

namespace {

double metric_of(const ScenarioScore& s, const std::string& metric) {
    if (metric == "fid_f1") return s.fid_f1;
    if (metric == "fid_recall") return s.fid_recall;
    if (metric == "fid_score") return s.fid_score();
    if (metric == "sid_f1") return s.sid_f1;
    if (metric == "sid_recall") return s.sid_recall;
    if (metric == "sid_score") return s.sid_score();
    throw ValidationError("bad_metric", metric);
}

std::string format_mean(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

double ScoreReport::mean(Condition condition, std::optional<FailureType> type,
                         const std::string& metric) const {
    for (const auto& cs : conditions) {
        if (cs.condition != condition) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : cs.scenarios) {
            if (type.has_value() && s.failure_type != *type) continue;
            sum += metric_of(s, metric);
            n++;
        }
        if (n == 0) {
            throw ValidationError("empty_selection", "no scenarios match the filter");
        }
        return sum / static_cast<double>(n);
    }
    throw ValidationError("bad_condition", "condition was not part of the experiment");
}

std::size_t ScoreReport::count(Condition condition, std::optional<FailureType> type) const {
    for (const auto& cs : conditions) {
        if (cs.condition != condition) continue;
        std::size_t n = 0;
        for (const auto& s : cs.scenarios) {
            if (!type.has_value() || s.failure_type == *type) n++;
        }
        return n;
    }
    return 0;
}

namespace {

const char* kMetrics[] = {"fid_f1", "fid_recall", "fid_score",
                          "sid_f1", "sid_recall", "sid_score"};

} // namespace

std::string ScoreReport::to_csv() const {
    std::ostringstream out;
    out << "condition,failure_type,metric,mean,n\n";
    const std::optional<FailureType> groups[] = {
        std::nullopt, FailureType::single_spatial, FailureType::compound_spatial,
        FailureType::attribute};
    for (const auto& cs : conditions) {
        for (const auto& group : groups) {
            const std::size_t n = count(cs.condition, group);
            if (n == 0) continue;
            for (const char* metric : kMetrics) {
                out << to_string(cs.condition) << ","
                    << (group.has_value() ? to_string(*group) : std::string("all")) << ","
                    << metric << "," << format_mean(mean(cs.condition, group, metric)) << ","
                    << n << "\n";
            }
        }
    }
    return out.str();
}

OrderedJson ScoreReport::to_json() const {
    OrderedJson j;
    j["format_version"] = 1;
    OrderedJson rows = OrderedJson::array();
    const std::optional<FailureType> groups[] = {
        std::nullopt, FailureType::single_spatial, FailureType::compound_spatial,
        FailureType::attribute};
    for (const auto& cs : conditions) {
        for (const auto& group : groups) {
            const std::size_t n = count(cs.condition, group);
            if (n == 0) continue;
            for (const char* metric : kMetrics) {
                OrderedJson row;
                row["condition"] = to_string(cs.condition);
                row["failure_type"] =
                    group.has_value() ? to_string(*group) : std::string("all");
                row["metric"] = metric;
                row["mean"] = mean(cs.condition, group, metric);
                row["n"] = n;
                rows.push_back(std::move(row));
            }
        }
    }
    j["rows"] = std::move(rows);
    return j;
}

ScoreReport run_experiment(const Corpus& corpus, std::span<const Condition> conditions,
                           const RankerFactory& ranker, ResponderPolicy policy,
                           std::uint64_t seed, const PhraseLexicon& lexicon) {
    const auto test_indices = corpus.indices_of(Split::test);
    if (test_indices.empty()) {
        throw ValidationError("empty_test_split", "the corpus has no test scenes");
    }
    const bool needs_ranker =
        std::find(conditions.begin(), conditions.end(), Condition::ssg_r) != conditions.end();
    if (needs_ranker && !ranker) {
        throw ValidationError("missing_ranker", "the ssg_r condition needs a ranker");
    }

    ScoreReport report;
    for (const Condition condition : conditions) {
        ConditionScores cs;
        cs.condition = condition;
        for (const std::size_t index : test_indices) {
            const FailureScenario& scenario = corpus.scenes[index];
            Explanation explanation;
            switch (condition) {
                case Condition::none: explanation = generate_none(scenario); break;
                case Condition::cb: explanation = generate_cb(scenario); break;
                case Condition::ssg:
                    explanation =
                        generate_ssg(scenario.graph, scenario.desired_object, lexicon);
                    break;
                case Condition::ssg_r: {
                    const auto voter = ranker(scenario);
                    explanation = generate_ssg_r(scenario.graph, scenario.desired_object,
                                                 *voter, lexicon);
                    break;
                }
            }
            const ResponseRecord response = simulate_responder(
                scenario, explanation, policy, Rng::derive(seed, index), lexicon);

            ScenarioScore score;
            score.scene_index = index;
            score.failure_type = scenario.failure_type;
            const auto truth_actions = ground_truth_solutions(scenario);
            score.fid_f1 = f1_score(response.selected_causes, scenario.causes);
            score.fid_recall = recall_score(response.selected_causes, scenario.causes);
            score.sid_f1 = f1_score(response.selected_solutions, truth_actions);
            score.sid_recall = recall_score(response.selected_solutions, truth_actions);
            cs.scenarios.push_back(score);
        }
        report.conditions.push_back(std::move(cs));
    }
    return report;
}

} // namespace pickwhy
