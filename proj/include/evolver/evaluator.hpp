#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolver/executor.hpp"
#include "evolver/llm_gateway.hpp"
#include "evolver/prompts.hpp"
#include "evolver/spec_model.hpp"

namespace evolver {

// ==========================================================================
// Evaluation framework: criteria derivation, LLM-as-judge scoring, and
// the aggregate S = f(O, criteria) in [0,1].
// ==========================================================================

enum class CriterionKind { Qualitative, Quantitative };
enum class Direction { HigherBetter, LowerBetter };

struct Criterion {
    std::string name;
    std::string description;
    CriterionKind kind = CriterionKind::Qualitative;
    Direction direction = Direction::HigherBetter;  // quantitative only
    double weight = 1.0;
};

struct CriteriaSet {
    std::vector<Criterion> qualitative;
    std::vector<Criterion> quantitative;
    double quant_blend = 0.0;  // share of the aggregate given to quantitative metrics

    /// The paper's qualitative quartet plus the two measurable
    /// quantitative metrics.
    static CriteriaSet defaults();

    /// nullopt when well-formed: >=1 qualitative criterion, unique names,
    /// positive weights, quant_blend in [0,1].
    std::optional<std::string> invalid_reason() const;

    const Criterion* find(const std::string& name) const;
    std::string content_hash() const;

    nlohmann::json to_json() const;
    static CriteriaSet from_json(const nlohmann::json& j);
};

struct CriterionScore {
    double score = 0.0;  // in [0,1]
    std::string rationale;
};

struct EvaluationReport {
    std::map<std::string, CriterionScore> per_criterion;  // every criteria-set name
    std::map<std::string, double> quantitative_raw;
    double aggregate = 0.0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
};

/// Quantitative values observed so far this run, keyed by criterion name.
using QuantHistory = std::map<std::string, std::vector<double>>;

struct DeriveOutcome {
    CriteriaSet criteria;
    std::vector<std::string> warnings;
};

/// Asks the LLM for criteria tailored to the spec and merges its
/// qualitative proposals behind the guaranteed defaults. Falls back to the
/// defaults alone (with a warning) when the model never produces a usable
/// criteria-set.
DeriveOutcome derive_criteria(const SystemSpec& spec, LlmGateway& gateway,
                              const PromptLibrary& prompts);

/// Judges the output once per qualitative criterion and fills quantitative
/// measurements from the execution result. A criterion whose judge reply
/// never parses scores 0.0 with rationale "judge-failure". `history` holds
/// quantitative values from earlier variants of the same run; the current
/// values are appended before min-max normalization.
EvaluationReport evaluate(const ExecutionResult& output, const CriteriaSet& criteria,
                          LlmGateway& gateway, const PromptLibrary& prompts,
                          const QuantHistory& history = {});

/// Weight-normalized blend documented on the report: (1-quant_blend)*qual
/// + quant_blend*quant, where each part is the weighted mean of its
/// criteria's scores. With no quantitative criteria (or scores) the
/// aggregate is the qualitative part alone.
double aggregate_score(const EvaluationReport& report, const CriteriaSet& criteria);

/// Min-max scaling of `value` against every observed value (lower-better
/// inverts); a constant history maps to 0.5.
double normalize_quant(double value, Direction direction, const std::vector<double>& history);

}  // namespace evolver
