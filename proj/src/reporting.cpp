#include "evolver/reporting.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "evolver/errors.hpp"
#include "evolver/hypothesis.hpp"

namespace evolver {

using nlohmann::json;

namespace {

std::string fmt_score(double x) { return json(x).dump(); }

const char* group_heading(HypothesisKind kind) {
    switch (kind) {
        case HypothesisKind::AddAgent:
        case HypothesisKind::ModifyAgent:
        case HypothesisKind::RemoveAgent:
            return "Introducing Specialized Agents";
        case HypothesisKind::SetTools:
            return "Tool Integration";
        case HypothesisKind::RedefineTask:
        case HypothesisKind::ReassignTask:
        case HypothesisKind::AddDependency:
        case HypothesisKind::RemoveDependency:
            return "Redefining Existing Tasks";
        case HypothesisKind::AddTask:
            return "Creating a New Task for Comprehensive Validation";
    }
    return "Other Modifications";
}

// Headings in Appendix order.
constexpr const char* kGroupOrder[] = {
    "Introducing Specialized Agents",
    "Tool Integration",
    "Redefining Existing Tasks",
    "Creating a New Task for Comprehensive Validation",
};

std::string payload_summary(const Hypothesis& h) {
    std::ostringstream os;
    bool first = true;
    for (auto it = h.payload.begin(); it != h.payload.end(); ++it) {
        if (!first) os << "; ";
        first = false;
        os << it.key() << ": ";
        if (it.value().is_string()) {
            os << it.value().get<std::string>();
        } else {
            os << it.value().dump();
        }
    }
    return os.str();
}

}  // namespace

const char* winner_name(Winner w) {
    switch (w) {
        case Winner::New: return "new";
        case Winner::Best: return "best";
        case Winner::Tie: return "tie";
    }
    return "?";
}

ComparisonReport comparison_report(const EvaluationReport& new_eval,
                                   const EvaluationReport& best_eval) {
    auto names_of = [](const EvaluationReport& e) {
        std::set<std::string> names;
        for (const auto& [name, _] : e.per_criterion) names.insert(name);
        return names;
    };
    if (names_of(new_eval) != names_of(best_eval)) {
        throw ReportError("comparison_report: the two evaluations cover different criteria");
    }

    ComparisonReport report;
    auto render_cell = [](const CriterionScore& s) {
        std::string cell = "score " + fmt_score(s.score);
        if (!s.rationale.empty()) cell += " — " + s.rationale;
        return cell;
    };

    std::vector<std::string> new_wins;
    for (const auto& [name, new_score] : new_eval.per_criterion) {
        const CriterionScore& best_score = best_eval.per_criterion.at(name);
        ComparisonVerdict v;
        v.dimension = name;
        v.best_known = render_cell(best_score);
        v.new_output = render_cell(new_score);
        if (new_score.score > best_score.score) {
            v.winner = Winner::New;
            v.evaluation = "the new output leads on " + name;
            new_wins.push_back(name);
        } else if (new_score.score < best_score.score) {
            v.winner = Winner::Best;
            v.evaluation = "the best-known output leads on " + name;
        } else {
            v.winner = Winner::Tie;
            v.evaluation = "both outputs score equally on " + name;
        }
        report.verdicts.push_back(std::move(v));
    }

    ComparisonVerdict overall;
    overall.dimension = "overall";
    overall.best_known = "aggregate " + fmt_score(best_eval.aggregate);
    overall.new_output = "aggregate " + fmt_score(new_eval.aggregate);
    // Matches the selection rule: new wins only on strictly greater aggregate.
    if (new_eval.aggregate > best_eval.aggregate) {
        overall.winner = Winner::New;
        overall.evaluation = "the new output scores higher overall";
    } else if (new_eval.aggregate < best_eval.aggregate) {
        overall.winner = Winner::Best;
        overall.evaluation = "the best-known output scores higher overall";
    } else {
        overall.winner = Winner::Tie;
        overall.evaluation = "the outputs tie overall";
    }
    Winner overall_winner = overall.winner;
    report.verdicts.push_back(std::move(overall));

    std::ostringstream conclusion;
    if (overall_winner == Winner::New) {
        conclusion << "The new output is superior to the best-known output (aggregate "
                   << fmt_score(new_eval.aggregate) << " vs " << fmt_score(best_eval.aggregate)
                   << ")";
        if (!new_wins.empty()) {
            conclusion << ", winning on";
            for (std::size_t i = 0; i < new_wins.size(); ++i) {
                conclusion << (i == 0 ? " " : ", ") << new_wins[i];
            }
        }
        conclusion << ". The new variant (its spec and output) has been saved as the "
                      "best-known variant.";
    } else if (overall_winner == Winner::Best) {
        conclusion << "The best-known output remains superior (aggregate "
                   << fmt_score(best_eval.aggregate) << " vs " << fmt_score(new_eval.aggregate)
                   << "); the best-known variant is retained.";
    } else {
        conclusion << "The outputs tie on aggregate score (" << fmt_score(new_eval.aggregate)
                   << "); the best-known variant is retained.";
    }
    report.conclusion = conclusion.str();
    return report;
}

std::string render_comparison_markdown(const ComparisonReport& report) {
    std::ostringstream os;
    os << "### Evaluation of New Output vs. Best-Known Output\n\n";
    os << "| Dimension | Best-Known Output | New Output | Evaluation | Winner |\n";
    os << "| --- | --- | --- | --- | --- |\n";
    for (const auto& v : report.verdicts) {
        os << "| " << v.dimension << " | " << v.best_known << " | " << v.new_output << " | "
           << v.evaluation << " | " << winner_name(v.winner) << " |\n";
    }
    os << "\n**Conclusion:** " << report.conclusion << "\n";
    return os.str();
}

std::string iteration_report(const IterationRecord& record, const RunStore& store) {
    std::ostringstream os;
    os << "# Refinement Iteration " << record.iteration << "\n\n";

    if (record.candidate_variant_ids.empty()) {
        os << "No viable candidate variants were produced this iteration";
        if (!record.warnings.empty()) {
            os << ":\n\n";
            for (const auto& w : record.warnings) os << "- " << w << "\n";
        } else {
            os << ".\n";
        }
        os << "\nBest-known variant `" << record.selected_best << "` retained (score "
           << fmt_score(record.best_score_after) << ").\n";
        return os.str();
    }

    // The report covers the top-ranked candidate of the iteration.
    std::vector<ScoredVariant> ranked;
    for (const auto& id : record.candidate_variant_ids) {
        auto it = record.evaluations.find(id);
        if (it == record.evaluations.end()) {
            throw ReportError("iteration record missing evaluation for variant " + id);
        }
        ScoredVariant sv;
        sv.variant.variant_id = id;
        sv.evaluation = it->second;
        ranked.push_back(std::move(sv));
    }
    ranked = rank_candidates(std::move(ranked));
    const std::string top_id = ranked.front().variant.variant_id;

    json meta;
    SystemSpec child_spec;
    SystemSpec incumbent_spec;
    std::optional<EvaluationReport> incumbent_eval;
    try {
        meta = store.load_meta(top_id);
        child_spec = store.load_spec(top_id);
        incumbent_spec = store.load_spec(record.incumbent_before);
        incumbent_eval = store.load_evaluation(record.incumbent_before);
    } catch (const StoreError& e) {
        throw ReportError(std::string("iteration report: ") + e.what());
    }
    if (!incumbent_eval) {
        throw ReportError("iteration report: missing evaluation for incumbent " +
                          record.incumbent_before);
    }

    // 1. Hypotheses, grouped under the appendix headings.
    std::map<std::string, std::vector<Hypothesis>> groups;
    for (const auto& hj : meta.value("applied_hypotheses", json::array())) {
        Hypothesis h = hypothesis_from_json(hj);
        groups[group_heading(h.kind)].push_back(std::move(h));
    }
    os << "## Initial Hypotheses and Justifications\n\n";
    for (const char* heading : kGroupOrder) {
        auto it = groups.find(heading);
        if (it == groups.end()) continue;  // empty groups are not rendered
        os << "### " << heading << "\n\n";
        for (const auto& h : it->second) {
            os << "- **" << hypothesis_kind_name(h.kind) << "** — " << payload_summary(h) << "\n";
            os << "  - *Rationale:* " << h.rationale << "\n";
        }
        os << "\n";
    }

    // 2. Revised workflow, from the structural diff against the incumbent.
    os << "## Revised Workflow\n\n";
    auto changes = diff_specs(incumbent_spec, child_spec);
    if (changes.empty()) os << "(no structural changes)\n";
    for (const auto& c : changes) {
        os << "- " << change_kind_name(c.kind);
        if (!c.id.empty()) os << " `" << c.id << "`";
        if (!c.fields.empty()) {
            os << ":";
            for (std::size_t i = 0; i < c.fields.size(); ++i) {
                const auto& f = c.fields[i];
                os << (i == 0 ? " " : "; ") << f.field;
                if (!f.before.empty() || !f.after.empty()) {
                    os << " \"" << f.before << "\" -> \"" << f.after << "\"";
                }
            }
        } else if (c.kind == ChangeKind::AddedAgent || c.kind == ChangeKind::AddedTask) {
            os << " — " << c.after.value("role", c.after.value("description", ""));
        }
        os << "\n";
    }
    os << "\nExecution order: ";
    auto order = topo_order(child_spec);
    for (std::size_t i = 0; i < order.size(); ++i) {
        os << (i == 0 ? "" : " -> ") << order[i];
    }
    os << "\n\n";

    // 3. Comparison against the pre-iteration best.
    os << "## Comprehensive Comparison Report\n\n";
    const EvaluationReport& new_eval = record.evaluations.at(top_id);
    os << render_comparison_markdown(comparison_report(new_eval, *incumbent_eval));

    if (!record.warnings.empty()) {
        os << "\n## Warnings\n\n";
        for (const auto& w : record.warnings) os << "- " << w << "\n";
    }

    os << "\n---\nSelected best: `" << record.selected_best << "` (score "
       << fmt_score(record.best_score_after) << ", previously "
       << fmt_score(record.best_score_before) << ")\n";
    return os.str();
}

std::string run_scores_export(const RunStore& store) {
    struct Row {
        int iteration;
        std::string variant_id;
        EvaluationReport evaluation;
    };
    std::vector<Row> rows;
    std::set<std::string> criterion_names;

    for (const auto& id : store.list_variant_ids()) {
        auto evaluation = store.load_evaluation(id);
        if (!evaluation) continue;  // never evaluated (e.g. aborted baseline)
        json meta = store.load_meta(id);
        for (const auto& [name, _] : evaluation->per_criterion) criterion_names.insert(name);
        rows.push_back({meta.value("iteration", 0), id, std::move(*evaluation)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.iteration != b.iteration) return a.iteration < b.iteration;
        return a.variant_id < b.variant_id;
    });

    std::ostringstream os;
    os << "iteration,variant_id";
    for (const auto& name : criterion_names) os << "," << name;
    os << ",aggregate\n";
    for (const auto& row : rows) {
        os << row.iteration << "," << row.variant_id;
        for (const auto& name : criterion_names) {
            os << ",";
            auto it = row.evaluation.per_criterion.find(name);
            if (it != row.evaluation.per_criterion.end()) os << fmt_score(it->second.score);
        }
        os << "," << fmt_score(row.evaluation.aggregate) << "\n";
    }
    return os.str();
}

}  // namespace evolver
