#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace evolver {

// ==========================================================================
// Structured modification hypotheses. A closed enum of mechanically
// applicable change kinds; payload shape is kind-specific and validated
// before anything touches a spec.
// ==========================================================================

enum class HypothesisKind {
    AddAgent,
    ModifyAgent,
    RemoveAgent,
    AddTask,
    RedefineTask,
    ReassignTask,
    AddDependency,
    RemoveDependency,
    SetTools,
};

const char* hypothesis_kind_name(HypothesisKind kind);
std::optional<HypothesisKind> parse_hypothesis_kind(const std::string& name);

struct Hypothesis {
    HypothesisKind kind = HypothesisKind::AddAgent;
    nlohmann::json payload;  // kind-specific record, see docs/hypothesis-schema.md
    std::string rationale;

    nlohmann::json to_json() const;
};

/// Shape check only (required fields, types). Returns an error message, or
/// nullopt when the payload matches its kind's schema. Whether the
/// hypothesis can be applied to a particular spec is a separate question.
std::optional<std::string> hypothesis_shape_error(const Hypothesis& h);

/// Strict parse; throws SpecParseError on malformed records.
Hypothesis hypothesis_from_json(const nlohmann::json& j);

struct HypothesisSet {
    std::vector<Hypothesis> hypotheses;  // applied in order
    std::string source_evaluation;       // variant_id the evaluation judged

    nlohmann::json to_json() const;
};

HypothesisSet hypothesis_set_from_json(const nlohmann::json& j);

}  // namespace evolver
