#include "evolver/orchestrator.hpp"

#include <map>
#include <memory>

#include "evolver/reporting.hpp"

namespace evolver {

using nlohmann::json;

json RunSummary::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["baseline_score"] = baseline_score;
    j["best_score"] = best_score;
    j["best_variant_id"] = best_variant_id;
    j["iterations_executed"] = iterations_executed;
    j["stop_reason"] = stop_reason;
    return j;
}

RunSummary RunSummary::from_json(const json& j) {
    RunSummary s;
    s.run_id = j.value("run_id", "");
    s.baseline_score = j.value("baseline_score", 0.0);
    s.best_score = j.value("best_score", 0.0);
    s.best_variant_id = j.value("best_variant_id", "");
    s.iterations_executed = j.value("iterations_executed", 0);
    s.stop_reason = j.value("stop_reason", "");
    return s;
}

RefinementHooks standard_hooks(LlmGateway& gateway, const CriteriaSet& criteria,
                               const PromptLibrary& prompts, const RunConfig& config) {
    auto history = std::make_shared<QuantHistory>();
    RefinementHooks hooks;

    hooks.execute = [&gateway, config](const SystemSpec& spec) {
        if (config.executor_mode == ExecutorMode::External) {
            return execute_external(config.external_command, spec, config.external_timeout);
        }
        return execute_workflow(spec, gateway, config.task_parallelism);
    };

    hooks.evaluate = [&gateway, prompts, criteria, history](const SystemSpec&,
                                                            const ExecutionResult& result) {
        EvaluationReport report = evaluate(result, criteria, gateway, prompts, *history);
        for (const auto& [name, value] : report.quantitative_raw) {
            (*history)[name].push_back(value);
        }
        return report;
    };

    hooks.generate = [&gateway, prompts](const EvaluationReport& evaluation,
                                         const SystemSpec& spec, const std::string& source_id,
                                         int branching) {
        GenerateOutcome out =
            generate_hypotheses(evaluation, spec, gateway, prompts, branching, source_id);
        return out.sets;
    };

    return hooks;
}

RunSummary run_refinement(const SystemSpec& spec0, const CriteriaSet& criteria,
                          const RunConfig& config, RunStore& store,
                          const RefinementHooks& hooks) {
    require_valid(spec0, "run_refinement");
    if (auto reason = criteria.invalid_reason()) {
        throw std::invalid_argument("run_refinement: " + *reason);
    }
    if (auto reason = config.invalid_reason()) {
        throw std::invalid_argument("run_refinement: " + *reason);
    }

    // Evaluations are pure recomputations for a fixed variant and criteria
    // set (temperature-0 judge), so they are computed once per variant.
    std::map<std::string, EvaluationReport> eval_cache;
    const std::string criteria_hash = criteria.content_hash();

    // ---- Initialization: execute and score the baseline.
    Variant baseline = Variant::baseline(spec0);
    ExecutionResult baseline_exec;
    try {
        baseline_exec = hooks.execute(spec0);
    } catch (const std::exception& e) {
        throw RunAbortError(std::string("baseline execution failed: ") + e.what());
    }
    if (!baseline_exec.success) {
        // Nothing to refine against; persist the wreckage for inspection.
        EvaluationReport empty;
        store.persist(baseline, baseline_exec, empty);
        std::string detail;
        for (const auto& e : baseline_exec.error_log) detail += "\n  " + e;
        throw RunAbortError("baseline execution failed (" +
                            std::to_string(baseline_exec.completed_tasks) + "/" +
                            std::to_string(baseline_exec.total_tasks) + " tasks)" + detail);
    }

    EvaluationReport baseline_eval = hooks.evaluate(spec0, baseline_exec);
    eval_cache[baseline.variant_id] = baseline_eval;
    store.persist(baseline, baseline_exec, baseline_eval);
    store.update_best(baseline.variant_id, baseline_eval.aggregate);

    ScoredVariant best{baseline, baseline_eval};
    const double baseline_score = baseline_eval.aggregate;

    std::vector<IterationRecord> history;
    std::string stop_reason = "max_iterations";

    for (int i = 1; i <= config.max_iterations; ++i) {
        IterationRecord record;
        record.iteration = i;
        record.incumbent_before = best.variant.variant_id;
        record.best_score_before = best.evaluation.aggregate;

        std::vector<HypothesisSet> sets;
        try {
            sets = hooks.generate(best.evaluation, best.variant.spec, best.variant.variant_id,
                                  config.branching);
        } catch (const GenerationError& e) {
            record.warnings.push_back(std::string("stalled: ") + e.what());
        }

        std::vector<ScoredVariant> candidates;
        for (const auto& set : sets) {
            ApplyOutcome outcome = apply_hypotheses(best.variant.spec, set);
            for (const auto& skipped : outcome.skipped) {
                record.warnings.push_back("skipped " +
                                          std::string(hypothesis_kind_name(skipped.hypothesis.kind)) +
                                          ": " + skipped.reason);
            }
            if (!outcome.ok()) {
                record.warnings.push_back("hypothesis set rejected: " + outcome.failure_reason);
                continue;
            }
            Variant child = Variant::child(*outcome.spec, best.variant, outcome.applied, i);

            bool already_seen =
                std::any_of(candidates.begin(), candidates.end(), [&](const ScoredVariant& c) {
                    return c.variant.variant_id == child.variant_id;
                });
            if (already_seen) continue;

            if (auto cached = eval_cache.find(child.variant_id); cached != eval_cache.end()) {
                // Revisited configuration: reuse its stored evaluation.
                candidates.push_back({child, cached->second});
                continue;
            }

            ExecutionResult exec;
            try {
                exec = hooks.execute(child.spec);
            } catch (const std::exception& e) {
                record.warnings.push_back("candidate execution failed: " + std::string(e.what()));
                continue;
            }
            // A degraded output is still evaluated; it simply loses selection.
            EvaluationReport eval = hooks.evaluate(child.spec, exec);
            eval_cache[child.variant_id] = eval;
            store.persist(child, exec, eval);
            candidates.push_back({child, eval});
        }

        for (const auto& c : candidates) {
            record.candidate_variant_ids.push_back(c.variant.variant_id);
            record.evaluations[c.variant.variant_id] = c.evaluation;
        }

        ScoredVariant selected = compare_and_select(candidates, best);
        if (selected.variant.variant_id != best.variant.variant_id) {
            best = selected;
            store.update_best(best.variant.variant_id, best.evaluation.aggregate);
        }
        record.selected_best = best.variant.variant_id;
        record.best_score_after = best.evaluation.aggregate;

        history.push_back(record);
        StopDecision decision = should_stop(history, config);
        history.back().stopped = decision.stop;
        if (decision.stop) history.back().stop_reason = decision.reason;

        store.write_iteration(history.back());
        store.write_report("iteration-" + std::to_string(i) + ".md",
                           iteration_report(history.back(), store));

        if (decision.stop) {
            stop_reason = decision.reason;
            break;
        }
    }

    RunSummary summary;
    summary.run_id = store.run_id();
    summary.baseline_score = baseline_score;
    summary.best_score = best.evaluation.aggregate;
    summary.best_variant_id = best.variant.variant_id;
    summary.iterations_executed = static_cast<int>(history.size());
    summary.stop_reason = stop_reason;

    store.write_summary(summary.to_json());
    store.write_report("scores.csv", run_scores_export(store));

    auto problems = store.verify();
    if (!problems.empty()) {
        std::string detail;
        for (const auto& p : problems) detail += "\n  " + p;
        throw StoreError("run store failed verification:" + detail);
    }
    return summary;
}

}  // namespace evolver
