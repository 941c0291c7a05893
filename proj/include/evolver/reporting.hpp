#pragma once

#include <string>
#include <vector>

#include "evolver/evaluator.hpp"
#include "evolver/run_store.hpp"

namespace evolver {

// ==========================================================================
// Documentation agent: iteration reports, new-vs-best comparison reports,
// and the run-level score table.
// ==========================================================================

enum class Winner { New, Best, Tie };

const char* winner_name(Winner w);

struct ComparisonVerdict {
    std::string dimension;   // criterion name, or "overall"
    std::string best_known;  // score + rationale, rendered
    std::string new_output;
    std::string evaluation;
    Winner winner = Winner::Tie;
};

struct ComparisonReport {
    std::vector<ComparisonVerdict> verdicts;  // per criterion, then "overall"
    std::string conclusion;
};

/// One verdict row per shared criterion plus an "overall" row on the
/// aggregates. The overall winner follows the selection rule: "new" only
/// on strictly greater aggregate. Throws ReportError when the two reports
/// were scored against different criteria.
ComparisonReport comparison_report(const EvaluationReport& new_eval,
                                   const EvaluationReport& best_eval);

std::string render_comparison_markdown(const ComparisonReport& report);

/// Appendix-style markdown for one iteration: hypotheses grouped under
/// their category headings (non-empty groups only), the revised workflow
/// from the spec diff, and the new-vs-best comparison. Deterministic for
/// a given record and store. Throws ReportError when referenced artifacts
/// are missing.
std::string iteration_report(const IterationRecord& record, const RunStore& store);

/// CSV of every evaluated variant: iteration, variant_id, per-criterion
/// scores (columns sorted by name), aggregate.
std::string run_scores_export(const RunStore& store);

}  // namespace evolver
