#include "evolver/evolution.hpp"

#include <algorithm>
#include <sstream>

namespace evolver {

using nlohmann::json;

namespace {

std::set<std::string> tools_from_payload(const json& p, const char* key = "tools") {
    std::set<std::string> tools;
    if (p.contains(key)) {
        for (const auto& t : p.at(key)) tools.insert(t.get<std::string>());
    }
    return tools;
}

std::vector<std::string> deps_from_payload(const json& p) {
    std::vector<std::string> deps;
    if (p.contains("dependencies")) {
        for (const auto& d : p.at("dependencies")) deps.push_back(d.get<std::string>());
    }
    return deps;
}

/// Mutates `spec` in place; returns a skip reason or nullopt on success.
std::optional<std::string> apply_one(SystemSpec& spec, const Hypothesis& h) {
    const json& p = h.payload;
    switch (h.kind) {
        case HypothesisKind::AddAgent: {
            const std::string id = p.at("agent_id").get<std::string>();
            if (spec.find_agent(id)) return "agent \"" + id + "\" already exists";
            AgentSpec a;
            a.agent_id = id;
            a.role = p.at("role").get<std::string>();
            a.goal = p.value("goal", "");
            a.backstory = p.value("backstory", "");
            a.tools = tools_from_payload(p);
            spec.agents.push_back(std::move(a));
            return std::nullopt;
        }
        case HypothesisKind::ModifyAgent: {
            const std::string id = p.at("agent_id").get<std::string>();
            for (auto& a : spec.agents) {
                if (a.agent_id != id) continue;
                if (p.contains("role")) a.role = p.at("role").get<std::string>();
                if (p.contains("goal")) a.goal = p.at("goal").get<std::string>();
                if (p.contains("backstory")) a.backstory = p.at("backstory").get<std::string>();
                if (p.contains("tools")) a.tools = tools_from_payload(p);
                return std::nullopt;
            }
            return "agent \"" + id + "\" does not exist";
        }
        case HypothesisKind::RemoveAgent: {
            const std::string id = p.at("agent_id").get<std::string>();
            if (!spec.find_agent(id)) return "agent \"" + id + "\" does not exist";
            for (const auto& t : spec.tasks) {
                if (t.agent_id == id) {
                    return "agent \"" + id + "\" is still assigned to task \"" + t.task_id + "\"";
                }
            }
            std::erase_if(spec.agents, [&](const AgentSpec& a) { return a.agent_id == id; });
            return std::nullopt;
        }
        case HypothesisKind::AddTask: {
            const std::string id = p.at("task_id").get<std::string>();
            if (spec.find_task(id)) return "task \"" + id + "\" already exists";
            TaskSpec t;
            t.task_id = id;
            t.description = p.value("description", "");
            t.expected_output = p.value("expected_output", "");
            t.agent_id = p.at("agent_id").get<std::string>();
            t.dependencies = deps_from_payload(p);
            t.tools = tools_from_payload(p);
            spec.tasks.push_back(std::move(t));
            return std::nullopt;
        }
        case HypothesisKind::RedefineTask: {
            const std::string id = p.at("task_id").get<std::string>();
            for (auto& t : spec.tasks) {
                if (t.task_id != id) continue;
                if (p.contains("description")) t.description = p.at("description").get<std::string>();
                if (p.contains("expected_output")) {
                    t.expected_output = p.at("expected_output").get<std::string>();
                }
                if (p.contains("agent_id")) t.agent_id = p.at("agent_id").get<std::string>();
                if (p.contains("dependencies")) t.dependencies = deps_from_payload(p);
                if (p.contains("tools")) t.tools = tools_from_payload(p);
                return std::nullopt;
            }
            return "task \"" + id + "\" does not exist";
        }
        case HypothesisKind::ReassignTask: {
            const std::string id = p.at("task_id").get<std::string>();
            const std::string agent = p.at("agent_id").get<std::string>();
            for (auto& t : spec.tasks) {
                if (t.task_id != id) continue;
                t.agent_id = agent;
                return std::nullopt;
            }
            return "task \"" + id + "\" does not exist";
        }
        case HypothesisKind::AddDependency: {
            const std::string id = p.at("task_id").get<std::string>();
            const std::string dep = p.at("depends_on").get<std::string>();
            for (auto& t : spec.tasks) {
                if (t.task_id != id) continue;
                if (std::find(t.dependencies.begin(), t.dependencies.end(), dep) !=
                    t.dependencies.end()) {
                    return "task \"" + id + "\" already depends on \"" + dep + "\"";
                }
                t.dependencies.push_back(dep);
                return std::nullopt;
            }
            return "task \"" + id + "\" does not exist";
        }
        case HypothesisKind::RemoveDependency: {
            const std::string id = p.at("task_id").get<std::string>();
            const std::string dep = p.at("depends_on").get<std::string>();
            for (auto& t : spec.tasks) {
                if (t.task_id != id) continue;
                auto it = std::find(t.dependencies.begin(), t.dependencies.end(), dep);
                if (it == t.dependencies.end()) {
                    return "task \"" + id + "\" does not depend on \"" + dep + "\"";
                }
                t.dependencies.erase(it);
                return std::nullopt;
            }
            return "task \"" + id + "\" does not exist";
        }
        case HypothesisKind::SetTools: {
            if (p.contains("agent_id")) {
                const std::string id = p.at("agent_id").get<std::string>();
                for (auto& a : spec.agents) {
                    if (a.agent_id != id) continue;
                    a.tools = tools_from_payload(p);
                    return std::nullopt;
                }
                return "agent \"" + id + "\" does not exist";
            }
            const std::string id = p.at("task_id").get<std::string>();
            for (auto& t : spec.tasks) {
                if (t.task_id != id) continue;
                t.tools = tools_from_payload(p);
                return std::nullopt;
            }
            return "task \"" + id + "\" does not exist";
        }
    }
    return "unknown hypothesis kind";
}

}  // namespace

ApplyOutcome apply_hypotheses(const SystemSpec& spec, const HypothesisSet& set) {
    require_valid(spec, "apply_hypotheses");

    ApplyOutcome outcome;
    SystemSpec current = spec;
    const json original = spec_to_json(spec);

    for (const auto& h : set.hypotheses) {
        if (auto shape = hypothesis_shape_error(h)) {
            outcome.skipped.push_back({h, "malformed payload: " + *shape});
            continue;
        }
        SystemSpec candidate = current;
        auto reason = apply_one(candidate, h);
        if (reason) {
            outcome.skipped.push_back({h, *reason});
            continue;
        }
        Validation v = validate_spec(candidate);
        if (!v.ok()) {
            std::string why = v.violations.front().rule;
            if (!v.violations.front().detail.empty()) why += " (" + v.violations.front().detail + ")";
            outcome.skipped.push_back({h, "would invalidate spec: " + why});
            continue;
        }
        if (spec_to_json(candidate) == spec_to_json(current)) {
            outcome.skipped.push_back({h, "no effect"});
            continue;
        }
        current = std::move(candidate);
        outcome.applied.push_back(h);
    }

    if (outcome.applied.empty()) {
        outcome.failure_reason = "no hypothesis survived application";
        return outcome;
    }
    if (spec_to_json(current) == original) {
        outcome.failure_reason = "surviving hypotheses cancelled out (no-op)";
        outcome.applied.clear();
        return outcome;
    }
    outcome.spec = std::move(current);
    return outcome;
}

std::string hypothesis_schema_text() {
    return R"(kind: one of
  AddAgent         payload {agent_id, role, goal?, backstory?, tools?: [tag]}
  ModifyAgent      payload {agent_id, role?, goal?, backstory?, tools?: [tag]}
  RemoveAgent      payload {agent_id}
  AddTask          payload {task_id, agent_id, description?, expected_output?, dependencies?: [task_id], tools?: [tag]}
  RedefineTask     payload {task_id, description?, expected_output?, agent_id?, dependencies?: [task_id], tools?: [tag]}
  ReassignTask     payload {task_id, agent_id}
  AddDependency    payload {task_id, depends_on}
  RemoveDependency payload {task_id, depends_on}
  SetTools         payload {agent_id | task_id, tools: [tag]}
rationale: nonempty text explaining the expected improvement)";
}

GenerateOutcome generate_hypotheses(const EvaluationReport& evaluation, const SystemSpec& spec,
                                    LlmGateway& gateway, const PromptLibrary& prompts,
                                    int branching, const std::string& source_evaluation_id) {
    require_valid(spec, "generate_hypotheses");
    if (branching < 1) throw std::invalid_argument("branching must be >= 1");

    // Weakest criteria first: that is where hypotheses should aim.
    std::vector<std::pair<std::string, CriterionScore>> ranked(evaluation.per_criterion.begin(),
                                                               evaluation.per_criterion.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second.score < b.second.score; });
    std::ostringstream scores;
    for (const auto& [name, s] : ranked) {
        scores << "- " << name << ": " << s.score;
        if (!s.rationale.empty()) scores << " — " << s.rationale;
        scores << "\n";
    }

    const std::string user = render_prompt(prompts.hypothesize, {{"spec", canonicalize(spec)},
                                                                 {"scores", scores.str()},
                                                                 {"schema", hypothesis_schema_text()}});

    GenerateOutcome out;
    for (int b = 0; b < branching; ++b) {
        json list;
        try {
            StructuredResult res = gateway.complete_structured(
                "You improve multi-agent systems through precise, structured modifications.", user,
                StructuredShape::HypothesisList);
            list = res.value;
        } catch (const std::exception& e) {
            out.warnings.push_back("hypothesis call " + std::to_string(b + 1) +
                                   " failed: " + e.what());
            continue;
        }
        HypothesisSet set;
        set.source_evaluation = source_evaluation_id;
        for (const auto& entry : list) {
            Hypothesis h;
            try {
                h = hypothesis_from_json(entry);
            } catch (const SpecParseError& e) {
                out.warnings.push_back(std::string("dropped hypothesis: ") + e.what());
                continue;
            }
            if (auto shape = hypothesis_shape_error(h)) {
                out.warnings.push_back("dropped hypothesis (" +
                                       std::string(hypothesis_kind_name(h.kind)) + "): " + *shape);
                continue;
            }
            set.hypotheses.push_back(std::move(h));
        }
        if (set.hypotheses.empty()) {
            out.warnings.push_back("hypothesis call " + std::to_string(b + 1) +
                                   " produced no usable hypotheses");
            continue;
        }
        out.sets.push_back(std::move(set));
    }

    if (out.sets.empty()) {
        std::string detail;
        for (const auto& w : out.warnings) detail += "\n  " + w;
        throw GenerationError("hypothesis generation produced nothing usable" + detail);
    }
    return out;
}

}  // namespace evolver
