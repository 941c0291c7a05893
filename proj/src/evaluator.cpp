#include "evolver/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "evolver/detail/hash.hpp"
#include "evolver/errors.hpp"

namespace evolver {

using nlohmann::json;

namespace {

const char* kind_name(CriterionKind k) {
    return k == CriterionKind::Qualitative ? "qualitative" : "quantitative";
}

const char* direction_name(Direction d) {
    return d == Direction::HigherBetter ? "higher-better" : "lower-better";
}

json criterion_to_json(const Criterion& c) {
    json j;
    j["name"] = c.name;
    j["description"] = c.description;
    j["kind"] = kind_name(c.kind);
    if (c.kind == CriterionKind::Quantitative) j["direction"] = direction_name(c.direction);
    j["weight"] = c.weight;
    return j;
}

Criterion criterion_from_json(const json& j, CriterionKind kind) {
    Criterion c;
    c.kind = kind;
    c.name = j.value("name", "");
    c.description = j.value("description", "");
    c.weight = j.value("weight", 1.0);
    std::string dir = j.value("direction", "higher-better");
    c.direction = dir == "lower-better" ? Direction::LowerBetter : Direction::HigherBetter;
    return c;
}

std::string snake_case(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

}  // namespace

CriteriaSet CriteriaSet::defaults() {
    CriteriaSet set;
    set.qualitative = {
        {"clarity", "The output is clear, well structured, and easy to follow.",
         CriterionKind::Qualitative, Direction::HigherBetter, 1.0},
        {"relevance", "The output is relevant to the task and the system objective.",
         CriterionKind::Qualitative, Direction::HigherBetter, 1.0},
        {"depth_of_analysis", "The output analyzes the subject thoroughly rather than superficially.",
         CriterionKind::Qualitative, Direction::HigherBetter, 1.0},
        {"actionability", "The output gives concrete, actionable recommendations.",
         CriterionKind::Qualitative, Direction::HigherBetter, 1.0},
    };
    set.quantitative = {
        {"execution_time", "Wall-clock execution time of the workflow, in seconds.",
         CriterionKind::Quantitative, Direction::LowerBetter, 1.0},
        {"task_completion_rate", "Fraction of tasks that completed.",
         CriterionKind::Quantitative, Direction::HigherBetter, 1.0},
    };
    set.quant_blend = 0.0;
    return set;
}

std::optional<std::string> CriteriaSet::invalid_reason() const {
    if (qualitative.empty()) return "criteria set needs at least one qualitative criterion";
    if (quant_blend < 0.0 || quant_blend > 1.0) return "quant_blend must be in [0,1]";
    std::set<std::string> names;
    for (const auto* list : {&qualitative, &quantitative}) {
        for (const auto& c : *list) {
            if (c.name.empty()) return "criterion with empty name";
            if (!names.insert(c.name).second) return "duplicate criterion name \"" + c.name + "\"";
            if (!(c.weight > 0.0)) return "criterion \"" + c.name + "\" needs weight > 0";
        }
    }
    return std::nullopt;
}

const Criterion* CriteriaSet::find(const std::string& name) const {
    for (const auto& c : qualitative)
        if (c.name == name) return &c;
    for (const auto& c : quantitative)
        if (c.name == name) return &c;
    return nullptr;
}

std::string CriteriaSet::content_hash() const {
    return detail::sha256_hex(to_json().dump());
}

json CriteriaSet::to_json() const {
    json j;
    j["qualitative"] = json::array();
    for (const auto& c : qualitative) j["qualitative"].push_back(criterion_to_json(c));
    j["quantitative"] = json::array();
    for (const auto& c : quantitative) j["quantitative"].push_back(criterion_to_json(c));
    j["quant_blend"] = quant_blend;
    return j;
}

CriteriaSet CriteriaSet::from_json(const json& j) {
    CriteriaSet set;
    if (j.contains("qualitative")) {
        for (const auto& c : j.at("qualitative")) {
            set.qualitative.push_back(criterion_from_json(c, CriterionKind::Qualitative));
        }
    }
    if (j.contains("quantitative")) {
        for (const auto& c : j.at("quantitative")) {
            set.quantitative.push_back(criterion_from_json(c, CriterionKind::Quantitative));
        }
    }
    set.quant_blend = j.value("quant_blend", 0.0);
    return set;
}

json EvaluationReport::to_json() const {
    json j;
    j["per_criterion"] = json::object();
    for (const auto& [name, s] : per_criterion) {
        j["per_criterion"][name] = json{{"score", s.score}, {"rationale", s.rationale}};
    }
    j["quantitative_raw"] = quantitative_raw;
    j["aggregate"] = aggregate;
    j["warnings"] = warnings;
    return j;
}

EvaluationReport EvaluationReport::from_json(const json& j) {
    EvaluationReport r;
    if (j.contains("per_criterion")) {
        for (auto it = j.at("per_criterion").begin(); it != j.at("per_criterion").end(); ++it) {
            r.per_criterion[it.key()] = {it.value().value("score", 0.0),
                                         it.value().value("rationale", "")};
        }
    }
    r.quantitative_raw = j.value("quantitative_raw", std::map<std::string, double>{});
    r.aggregate = j.value("aggregate", 0.0);
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
}

// --------------------------------------------------------------------------

DeriveOutcome derive_criteria(const SystemSpec& spec, LlmGateway& gateway,
                              const PromptLibrary& prompts) {
    require_valid(spec, "derive_criteria");

    std::ostringstream agents, tasks;
    for (const auto& a : spec.agents) {
        agents << "- " << a.agent_id << ": " << a.role;
        if (!a.goal.empty()) agents << " — " << a.goal;
        agents << "\n";
    }
    for (const auto& t : spec.tasks) {
        tasks << "- " << t.task_id << ": " << t.description;
        if (!t.dependencies.empty()) {
            tasks << " (after:";
            for (const auto& d : t.dependencies) tasks << " " << d;
            tasks << ")";
        }
        tasks << "\n";
    }

    DeriveOutcome out;
    out.criteria = CriteriaSet::defaults();

    std::string user = render_prompt(prompts.derive_criteria, {{"objective", spec.objective},
                                                               {"agents", agents.str()},
                                                               {"tasks", tasks.str()}});
    json proposed;
    try {
        StructuredResult res = gateway.complete_structured(
            "You design evaluation criteria for agent workflows.", user,
            StructuredShape::CriteriaSet, 0.0);
        proposed = res.value;
    } catch (const std::exception& e) {
        out.warnings.push_back(std::string("criteria derivation fell back to defaults: ") +
                               e.what());
        return out;
    }

    // Merge qualitative proposals behind the guaranteed defaults.
    // Quantitative metrics stay the two the executor can measure.
    std::set<std::string> names;
    for (const auto& c : out.criteria.qualitative) names.insert(c.name);
    if (proposed.contains("qualitative")) {
        for (const auto& p : proposed.at("qualitative")) {
            Criterion c = criterion_from_json(p, CriterionKind::Qualitative);
            c.name = snake_case(c.name);
            if (c.name.empty() || !(c.weight > 0.0)) {
                out.warnings.push_back("dropped malformed proposed criterion");
                continue;
            }
            if (!names.insert(c.name).second) continue;  // already covered
            c.direction = Direction::HigherBetter;
            out.criteria.qualitative.push_back(std::move(c));
        }
    }
    if (proposed.contains("quantitative") && !proposed.at("quantitative").empty()) {
        out.warnings.push_back("proposed quantitative criteria ignored (not measurable here)");
    }
    return out;
}

EvaluationReport evaluate(const ExecutionResult& output, const CriteriaSet& criteria,
                          LlmGateway& gateway, const PromptLibrary& prompts,
                          const QuantHistory& history) {
    if (auto reason = criteria.invalid_reason()) {
        throw std::invalid_argument("evaluate: " + *reason);
    }

    EvaluationReport report;

    for (const auto& c : criteria.qualitative) {
        std::string user = render_prompt(prompts.judge, {{"criterion_name", c.name},
                                                         {"criterion_description", c.description},
                                                         {"output", output.final_output}});
        CriterionScore score;
        try {
            StructuredResult res = gateway.complete_structured(
                "You are an impartial judge. Follow the scoring instructions exactly.", user,
                StructuredShape::EvaluationReport, 0.0);
            double raw = res.value.at("score").get<double>();
            score.score = std::clamp(raw, 0.0, 1.0);
            if (raw < 0.0 || raw > 1.0) {
                report.warnings.push_back("criterion \"" + c.name + "\": score " +
                                          std::to_string(raw) + " clamped to [0,1]");
            }
            score.rationale = res.value.value("rationale", "");
        } catch (const std::exception& e) {
            score.score = 0.0;
            score.rationale = "judge-failure";
            report.warnings.push_back("criterion \"" + c.name + "\": " + e.what());
        }
        report.per_criterion[c.name] = std::move(score);
    }

    for (const auto& c : criteria.quantitative) {
        std::optional<double> value;
        if (c.name == "execution_time") {
            value = output.total_time_ms / 1000.0;
        } else if (c.name == "task_completion_rate") {
            value = output.completion_rate();
        }
        if (!value) {
            report.per_criterion[c.name] = {0.5, "no measurement available"};
            report.warnings.push_back("quantitative criterion \"" + c.name +
                                      "\" has no measurement source");
            continue;
        }
        report.quantitative_raw[c.name] = *value;
        std::vector<double> observed;
        if (auto it = history.find(c.name); it != history.end()) observed = it->second;
        observed.push_back(*value);
        double normalized = normalize_quant(*value, c.direction, observed);
        std::ostringstream rationale;
        rationale << "raw " << *value << " normalized against " << observed.size()
                  << " observation(s)";
        report.per_criterion[c.name] = {normalized, rationale.str()};
    }

    report.aggregate = aggregate_score(report, criteria);
    return report;
}

double aggregate_score(const EvaluationReport& report, const CriteriaSet& criteria) {
    auto weighted_mean = [&](const std::vector<Criterion>& list,
                             bool required) -> std::optional<double> {
        double weight_sum = 0.0, score_sum = 0.0;
        for (const auto& c : list) {
            auto it = report.per_criterion.find(c.name);
            if (it == report.per_criterion.end()) {
                if (required) {
                    throw std::invalid_argument("aggregate: missing score for \"" + c.name + "\"");
                }
                continue;
            }
            weight_sum += c.weight;
            score_sum += c.weight * it->second.score;
        }
        if (weight_sum == 0.0) return std::nullopt;
        return score_sum / weight_sum;
    };

    auto qual = weighted_mean(criteria.qualitative, true);
    if (!qual) throw std::invalid_argument("aggregate: no qualitative scores");
    auto quant = weighted_mean(criteria.quantitative, false);
    if (!quant || criteria.quant_blend == 0.0) return *qual;
    return (1.0 - criteria.quant_blend) * *qual + criteria.quant_blend * *quant;
}

double normalize_quant(double value, Direction direction, const std::vector<double>& history) {
    if (history.empty()) return 0.5;
    auto [lo_it, hi_it] = std::minmax_element(history.begin(), history.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return 0.5;
    double scaled = (value - lo) / (hi - lo);
    if (direction == Direction::LowerBetter) scaled = 1.0 - scaled;
    return std::clamp(scaled, 0.0, 1.0);
}

}  // namespace evolver
