#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace evolver {

// ==========================================================================
// Variant data model: agents, tasks, and the workflow spec they form.
// ==========================================================================

struct AgentSpec {
    std::string agent_id;
    std::string role;
    std::string goal;
    std::string backstory;               // optional; empty means absent
    std::set<std::string> tools;         // opaque tool tags

    bool operator==(const AgentSpec&) const = default;
};

struct TaskSpec {
    std::string task_id;
    std::string description;
    std::string expected_output;
    std::string agent_id;                     // owning agent
    std::vector<std::string> dependencies;    // ordered task_id references
    std::set<std::string> tools;

    bool operator==(const TaskSpec&) const = default;
};

struct SystemSpec {
    std::string name;
    std::string objective;
    std::vector<AgentSpec> agents;
    std::vector<TaskSpec> tasks;
    std::map<std::string, std::string> metadata;

    bool operator==(const SystemSpec&) const = default;

    const AgentSpec* find_agent(const std::string& agent_id) const;
    const TaskSpec* find_task(const std::string& task_id) const;
};

// --------------------------------------------------------------------------
// Validation. Violations are data, not failures.
// --------------------------------------------------------------------------

struct Violation {
    std::string subject_id;  // offending agent/task id ("" for spec-level rules)
    std::string rule;        // e.g. "unresolved dependency", "cycle"
    std::string detail;
};

struct Validation {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

Validation validate_spec(const SystemSpec& spec);

/// Throws SpecValidationError when the spec does not validate.
void require_valid(const SystemSpec& spec, const std::string& context);

// --------------------------------------------------------------------------
// Canonical serialization. The canonical text doubles as the spec file
// format: a UTF-8 JSON document with top-level keys name, objective,
// agents, tasks, metadata. Collections are sorted by id/tag and free-text
// fields are whitespace-normalized, so equal specs hash equally no matter
// how their in-memory collections were ordered.
// --------------------------------------------------------------------------

nlohmann::json spec_to_json(const SystemSpec& spec);

/// Strict parse: unknown keys and wrong types are SpecParseError.
SystemSpec spec_from_json(const nlohmann::json& j);
SystemSpec parse_spec_text(const std::string& text);
SystemSpec load_spec_file(const std::string& path);

/// Deterministic byte serialization of a valid spec.
std::string canonicalize(const SystemSpec& spec);

/// Content hash of the canonical text (sha-256 hex); the variant_id.
std::string spec_content_hash(const SystemSpec& spec);

/// Canonical equality: same canonical bytes.
bool canonically_equal(const SystemSpec& a, const SystemSpec& b);

// --------------------------------------------------------------------------
// Structural diffing.
// --------------------------------------------------------------------------

enum class ChangeKind {
    AddedAgent,
    RemovedAgent,
    ModifiedAgent,
    AddedTask,
    RemovedTask,
    ModifiedTask,
    ModifiedInfo,  // name / objective / metadata deltas
};

const char* change_kind_name(ChangeKind kind);

struct FieldDelta {
    std::string field;
    std::string before;
    std::string after;
};

/// One entry per changed entity. `before`/`after` carry the full entity
/// JSON (null when the entity does not exist on that side), so a change
/// list is sufficient to rebuild `b` from `a`.
struct SpecChange {
    ChangeKind kind;
    std::string id;  // agent_id / task_id; "" for ModifiedInfo
    std::vector<FieldDelta> fields;
    nlohmann::json before;
    nlohmann::json after;
};

std::vector<SpecChange> diff_specs(const SystemSpec& a, const SystemSpec& b);

/// Replays a diff onto `a`; used to check the diff contract and by tests.
SystemSpec apply_changes(const SystemSpec& a, const std::vector<SpecChange>& changes);

}  // namespace evolver
