#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolver/evaluator.hpp"
#include "evolver/executor.hpp"
#include "evolver/variant.hpp"

namespace evolver {

// ==========================================================================
// Memory module and Selection Agent: durable run state with lineage, the
// best-known pointer, candidate ranking, and the stopping rule.
// ==========================================================================

enum class ExecutorMode { Workflow, External };

const char* executor_mode_name(ExecutorMode mode);
std::optional<ExecutorMode> parse_executor_mode(const std::string& name);

struct RunConfig {
    double epsilon = 0.01;  // minimum per-iteration improvement
    int max_iterations = 10;
    int patience = 2;  // consecutive sub-epsilon iterations tolerated
    int branching = 1;
    ExecutorMode executor_mode = ExecutorMode::Workflow;
    long seed = 0;
    std::string external_command;  // executor_mode == External
    std::chrono::milliseconds external_timeout{60000};
    int task_parallelism = 1;

    std::optional<std::string> invalid_reason() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

struct IterationRecord {
    int iteration = 0;
    std::string incumbent_before;  // best-known variant entering the iteration
    std::vector<std::string> candidate_variant_ids;
    std::map<std::string, EvaluationReport> evaluations;
    std::string selected_best;
    double best_score_before = 0.0;
    double best_score_after = 0.0;
    bool stopped = false;
    std::optional<std::string> stop_reason;
    std::vector<std::string> warnings;

    double improvement() const { return best_score_after - best_score_before; }

    nlohmann::json to_json() const;
    static IterationRecord from_json(const nlohmann::json& j);
};

struct ScoredVariant {
    Variant variant;
    EvaluationReport evaluation;
};

/// Candidates ranked by aggregate descending; ties broken by lower
/// execution_time, then lexicographic variant_id.
std::vector<ScoredVariant> rank_candidates(std::vector<ScoredVariant> candidates);

/// The top candidate replaces the incumbent only on strictly greater
/// aggregate (ties keep the incumbent). An empty candidate list keeps the
/// incumbent.
ScoredVariant compare_and_select(const std::vector<ScoredVariant>& candidates,
                                 const ScoredVariant& incumbent);

struct StopDecision {
    bool stop = false;
    std::string reason;  // "max_iterations" | "converged"
};

/// Pure function of (history, config): stop("max_iterations") once
/// max_iterations records exist; stop("converged") once the last
/// `patience` iterations each improved by less than epsilon.
StopDecision should_stop(const std::vector<IterationRecord>& history, const RunConfig& config);

// --------------------------------------------------------------------------
// Run directory:
//   <run_dir>/config.json, criteria.json, exchanges.log, best.json,
//   summary.json, variants/<id>/{spec.json,output.txt,evaluation.json,
//   meta.json}, iterations/<n>.json, reports/
// --------------------------------------------------------------------------

class RunStore {
public:
    /// Creates the layout and persists the baseline variant's spec.
    /// Refuses a non-empty directory unless `force`.
    static RunStore create(const std::filesystem::path& run_dir, const RunConfig& config,
                           const SystemSpec& baseline, bool force = false);
    static RunStore open(const std::filesystem::path& run_dir);

    const std::filesystem::path& root() const { return root_; }
    std::string run_id() const { return root_.filename().string(); }
    std::filesystem::path variant_dir(const std::string& variant_id) const;

    // config / criteria
    void write_config(const RunConfig& config) const;
    RunConfig read_config() const;
    void write_criteria(const CriteriaSet& criteria) const;
    std::optional<CriteriaSet> read_criteria() const;

    // variants
    void persist_spec(const Variant& variant) const;
    void persist(const Variant& variant, const ExecutionResult& execution,
                 const EvaluationReport& evaluation) const;
    std::vector<std::string> list_variant_ids() const;
    SystemSpec load_spec(const std::string& variant_id) const;
    nlohmann::json load_meta(const std::string& variant_id) const;
    std::optional<EvaluationReport> load_evaluation(const std::string& variant_id) const;
    std::string load_output(const std::string& variant_id) const;

    // best pointer (atomic replace)
    void update_best(const std::string& variant_id, double score) const;
    std::optional<std::pair<std::string, double>> read_best() const;

    // iterations
    void write_iteration(const IterationRecord& record) const;
    std::vector<IterationRecord> read_iterations() const;

    // summary + reports
    void write_summary(const nlohmann::json& summary) const;
    std::optional<nlohmann::json> read_summary() const;
    void write_report(const std::string& filename, const std::string& text) const;

    // exchange log (JSONL, appended in call order)
    void append_exchange(const ChatExchange& exchange);
    std::vector<ChatExchange> read_exchanges() const;
    ExchangeSink exchange_sink();

    /// Store-level invariants: monotone best-score sequence and parent
    /// chains that resolve back to the baseline. Returns problems found.
    std::vector<std::string> verify() const;

private:
    explicit RunStore(std::filesystem::path root);

    std::filesystem::path root_;
    std::shared_ptr<std::mutex> log_mutex_;  // serializes exchange appends
};

/// flock-based guard against concurrent `run` invocations on one run dir.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    bool locked() const { return fd_ >= 0; }

private:
    int fd_ = -1;
};

}  // namespace evolver
