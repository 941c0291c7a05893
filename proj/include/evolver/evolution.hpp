#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evolver/errors.hpp"
#include "evolver/evaluator.hpp"
#include "evolver/hypothesis.hpp"
#include "evolver/llm_gateway.hpp"
#include "evolver/prompts.hpp"
#include "evolver/spec_model.hpp"

namespace evolver {

// ==========================================================================
// Synthesis framework: turn evaluation feedback into hypothesis sets and
// apply them as the modification function M(H, C).
// ==========================================================================

/// No usable hypothesis set came back; the iteration stalls.
class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

struct SkippedHypothesis {
    Hypothesis hypothesis;
    std::string reason;
};

struct ApplyOutcome {
    std::optional<SystemSpec> spec;  // nullopt: nothing usable survived
    std::vector<Hypothesis> applied;
    std::vector<SkippedHypothesis> skipped;
    std::string failure_reason;

    bool ok() const { return spec.has_value(); }
};

/// Applies the set's hypotheses in order. Each application is re-validated;
/// one that would break a spec invariant (dangling reference, cycle, ...)
/// or that changes nothing is skipped with a reason. A result canonically
/// equal to the input is a failure, never an identity: the loop must not
/// silently re-evaluate the same variant.
ApplyOutcome apply_hypotheses(const SystemSpec& spec, const HypothesisSet& set);

struct GenerateOutcome {
    std::vector<HypothesisSet> sets;  // at most `branching`, each nonempty
    std::vector<std::string> warnings;
};

/// Prompts the model `branching` times with the spec, the per-criterion
/// scores (weakest first), and the hypothesis schema; parses and
/// shape-validates each reply, dropping invalid entries with warnings.
/// Throws GenerationError when every set comes back empty or unparseable.
GenerateOutcome generate_hypotheses(const EvaluationReport& evaluation, const SystemSpec& spec,
                                    LlmGateway& gateway, const PromptLibrary& prompts,
                                    int branching, const std::string& source_evaluation_id = "");

/// Compact schema text embedded in the hypothesize prompt; the long form
/// lives in docs/hypothesis-schema.md.
std::string hypothesis_schema_text();

}  // namespace evolver
