#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pickwhy/explain.hpp"
#include "pickwhy/ranking.hpp"
#include "pickwhy/scene_model.hpp"
#include "pickwhy/synthetic_scenes.hpp"

namespace pickwhy {

// Scores how well a responder identifies failure causes (FId) and the
// actions that remedy them (SId). Compound scenarios are scored by recall,
// everything else by F1.

struct SolutionAction {
    enum class Kind {
        remove_occluder,
        open_container,
        handle_with_care,
        get_help_for_heavy,
        wait_to_cool,
        none_needed
    };

    Kind kind = Kind::none_needed;
    NodeId target = -1; // for remove_occluder / open_container

    auto operator<=>(const SolutionAction&) const = default;
};

std::string to_string(const SolutionAction& a);

// Set-membership F1 / recall. Truth must be non-empty
// (ValidationError("empty_truth") otherwise); an empty selection scores 0.
double f1_score(std::span<const FailureCause> selected, std::span<const FailureCause> truth);
double recall_score(std::span<const FailureCause> selected,
                    std::span<const FailureCause> truth);
double f1_score(std::span<const SolutionAction> selected,
                std::span<const SolutionAction> truth);
double recall_score(std::span<const SolutionAction> selected,
                    std::span<const SolutionAction> truth);

// One remedy per cause: occlusion -> remove the occluder, closed containment
// -> open the container, fragile/heavy/hot -> the matching handling action.
std::vector<SolutionAction> ground_truth_solutions(const FailureScenario& scenario);

enum class ResponderPolicy { oracle, random_k, literal_text_parser };

ResponderPolicy responder_policy_from_string(std::string_view s);
std::string to_string(ResponderPolicy p);

struct ResponseRecord {
    std::string scenario_id;
    std::vector<FailureCause> selected_causes;
    std::vector<SolutionAction> selected_solutions;
};

// oracle: believes the explanation verbatim — every supporting relation (and
//         a mentioned attribute) becomes a selected cause plus its remedy.
// random_k: selects up to 3 seeded random candidates from the subgraph.
// literal_text_parser: recovers causes by parsing the explanation text back
//         through the lexicon, including the coarse cb phrases.
ResponseRecord simulate_responder(const FailureScenario& scenario,
                                  const Explanation& explanation, ResponderPolicy policy,
                                  std::uint64_t seed,
                                  const PhraseLexicon& lexicon = PhraseLexicon::defaults());

enum class Condition { none, cb, ssg, ssg_r };

std::string to_string(Condition c);
Condition condition_from_string(std::string_view s);

// Supplies the ranker for ssg_r explanations; the oracle factory builds a
// ground-truth voter per scenario, the fixed factory shares a trained one.
using RankerFactory =
    std::function<std::unique_ptr<PairwiseVoter>(const FailureScenario&)>;

RankerFactory oracle_ranker_factory();
RankerFactory fixed_ranker_factory(std::shared_ptr<const RankerEnsemble> ranker);

struct ScenarioScore {
    std::size_t scene_index = 0;
    FailureType failure_type = FailureType::single_spatial;
    double fid_f1 = 0.0;
    double fid_recall = 0.0;
    double sid_f1 = 0.0;
    double sid_recall = 0.0;

    // recall for compound scenarios, F1 otherwise
    double fid_score() const;
    double sid_score() const;
};

struct ConditionScores {
    Condition condition = Condition::none;
    std::vector<ScenarioScore> scenarios;
};

struct ScoreReport {
    std::vector<ConditionScores> conditions;

    // Unweighted mean over the scenarios of `condition` restricted to
    // `type` (nullopt = all). `metric` is one of fid_f1, fid_recall,
    // fid_score, sid_f1, sid_recall, sid_score.
    double mean(Condition condition, std::optional<FailureType> type,
                const std::string& metric) const;
    std::size_t count(Condition condition, std::optional<FailureType> type) const;

    // columns: condition,failure_type,metric,mean,n
    std::string to_csv() const;
    OrderedJson to_json() const;
};

// Scores the test split of `corpus` under every condition. Throws
// ValidationError("missing_ranker") when ssg_r is requested without a
// factory and ValidationError("empty_test_split") when there is nothing
// to score.
ScoreReport run_experiment(const Corpus& corpus, std::span<const Condition> conditions,
                           const RankerFactory& ranker, ResponderPolicy policy,
                           std::uint64_t seed,
                           const PhraseLexicon& lexicon = PhraseLexicon::defaults());

} // namespace pickwhy
