#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolver/llm_gateway.hpp"
#include "evolver/spec_model.hpp"

namespace evolver {

// ==========================================================================
// Runs a variant's workflow and captures its output O plus the quantitative
// measurements (execution time, task completion) the evaluator blends in.
// ==========================================================================

struct ExecutionResult {
    std::map<std::string, std::string> per_task_outputs;
    std::string final_output;  // terminal task outputs, topological order
    std::map<std::string, double> per_task_latency_ms;
    double total_time_ms = 0.0;
    int completed_tasks = 0;
    int total_tasks = 0;
    bool success = false;  // completed_tasks == total_tasks
    std::vector<std::string> error_log;

    double completion_rate() const {
        return total_tasks == 0 ? 0.0 : static_cast<double>(completed_tasks) / total_tasks;
    }

    nlohmann::json to_json() const;
    static ExecutionResult from_json(const nlohmann::json& j);
};

/// Dependency-respecting task order; ties broken lexicographically by
/// task_id so the order is deterministic. Requires a validated spec.
std::vector<std::string> topo_order(const SystemSpec& spec);

/// Executes every task with one LLM call, feeding each task its agent's
/// role/goal, the task description, and the full outputs of its
/// dependencies. A failing task is logged and its dependents skipped;
/// independent tasks still run. `parallelism` > 1 lets independent tasks
/// run concurrently (scripted runs should stay at 1 so ordered scripts
/// line up).
ExecutionResult execute_workflow(const SystemSpec& spec, LlmGateway& gateway,
                                 int parallelism = 1);

/// Raw-code escape hatch: writes the canonical spec to a file inside a
/// fresh working directory and runs `command... <spec-file>` there.
/// Stdout becomes the output; the process is killed at the timeout.
ExecutionResult execute_external(const std::string& command, const SystemSpec& spec,
                                 std::chrono::milliseconds timeout);

}  // namespace evolver
