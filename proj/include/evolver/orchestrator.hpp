#pragma once

#include <functional>
#include <string>
#include <vector>

#include "evolver/evaluator.hpp"
#include "evolver/evolution.hpp"
#include "evolver/run_store.hpp"

namespace evolver {

// ==========================================================================
// Refinement agent: init, iterate (hypothesize -> modify -> execute ->
// evaluate -> select -> persist), stop, return the best-known variant.
// ==========================================================================

/// Baseline failed to execute or the store gave out; exit code 2 territory.
class RunAbortError : public std::runtime_error {
public:
    explicit RunAbortError(const std::string& what) : std::runtime_error(what) {}
};

struct RunSummary {
    std::string run_id;
    double baseline_score = 0.0;
    double best_score = 0.0;
    std::string best_variant_id;
    int iterations_executed = 0;
    std::string stop_reason;

    nlohmann::json to_json() const;
    static RunSummary from_json(const nlohmann::json& j);
};

/// The three pluggable stages of the loop. Production wiring talks to the
/// gateway; tests swap in synthetic landscapes and scripted generators
/// without touching the control flow.
struct RefinementHooks {
    std::function<ExecutionResult(const SystemSpec&)> execute;
    std::function<EvaluationReport(const SystemSpec&, const ExecutionResult&)> evaluate;
    /// May throw GenerationError to stall the iteration.
    std::function<std::vector<HypothesisSet>(const EvaluationReport&, const SystemSpec&,
                                             const std::string& source_id, int branching)>
        generate;
};

/// Gateway-backed wiring: executor per config.executor_mode, LLM judge
/// with run-wide quantitative history, hypothesis generation via prompts.
RefinementHooks standard_hooks(LlmGateway& gateway, const CriteriaSet& criteria,
                               const PromptLibrary& prompts, const RunConfig& config);

/// Runs the refinement loop to completion and returns the summary (also
/// persisted as summary.json). Evaluations are cached per variant so the
/// incumbent is never re-judged. Throws RunAbortError when the baseline
/// fails to execute or the store fails.
RunSummary run_refinement(const SystemSpec& spec0, const CriteriaSet& criteria,
                          const RunConfig& config, RunStore& store,
                          const RefinementHooks& hooks);

}  // namespace evolver
