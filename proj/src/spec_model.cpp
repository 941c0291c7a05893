#include "evolver/spec_model.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "evolver/detail/hash.hpp"
#include "evolver/errors.hpp"

namespace evolver {

using nlohmann::json;

namespace {

// Collapse whitespace runs to single spaces and trim the ends. Free-text
// fields are normalized this way so formatting noise never changes a
// variant_id.
std::string normalize_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = !out.empty();
        } else {
            if (in_space) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw SpecParseError("unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

std::string get_string(const json& j, const std::string& key, const std::string& where,
                       bool required) {
    if (!j.contains(key)) {
        if (required) throw SpecParseError("missing key \"" + key + "\" in " + where);
        return "";
    }
    if (!j.at(key).is_string()) {
        throw SpecParseError("key \"" + key + "\" in " + where + " must be a string");
    }
    return j.at(key).get<std::string>();
}

std::set<std::string> get_string_set(const json& j, const std::string& key,
                                     const std::string& where) {
    std::set<std::string> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) {
        throw SpecParseError("key \"" + key + "\" in " + where + " must be an array");
    }
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) {
            throw SpecParseError("entries of \"" + key + "\" in " + where + " must be strings");
        }
        out.insert(v.get<std::string>());
    }
    return out;
}

json tools_to_json(const std::set<std::string>& tools) {
    json arr = json::array();
    for (const auto& t : tools) arr.push_back(t);  // std::set iterates sorted
    return arr;
}

json agent_to_json(const AgentSpec& a) {
    json j;
    j["agent_id"] = a.agent_id;
    j["role"] = normalize_text(a.role);
    j["goal"] = normalize_text(a.goal);
    if (!a.backstory.empty()) j["backstory"] = normalize_text(a.backstory);
    j["tools"] = tools_to_json(a.tools);
    return j;
}

json task_to_json(const TaskSpec& t) {
    json j;
    j["task_id"] = t.task_id;
    j["description"] = normalize_text(t.description);
    j["expected_output"] = normalize_text(t.expected_output);
    j["agent_id"] = t.agent_id;
    j["dependencies"] = t.dependencies;  // semantically ordered; kept as given
    j["tools"] = tools_to_json(t.tools);
    return j;
}

AgentSpec agent_from_json(const json& j) {
    if (!j.is_object()) throw SpecParseError("agent entry must be an object");
    check_keys(j, {"agent_id", "role", "goal", "backstory", "tools"}, "agent");
    AgentSpec a;
    a.agent_id = get_string(j, "agent_id", "agent", true);
    a.role = get_string(j, "role", "agent \"" + a.agent_id + "\"", true);
    a.goal = get_string(j, "goal", "agent \"" + a.agent_id + "\"", false);
    a.backstory = get_string(j, "backstory", "agent \"" + a.agent_id + "\"", false);
    a.tools = get_string_set(j, "tools", "agent \"" + a.agent_id + "\"");
    return a;
}

TaskSpec task_from_json(const json& j) {
    if (!j.is_object()) throw SpecParseError("task entry must be an object");
    check_keys(j, {"task_id", "description", "expected_output", "agent_id", "dependencies", "tools"},
               "task");
    TaskSpec t;
    t.task_id = get_string(j, "task_id", "task", true);
    const std::string where = "task \"" + t.task_id + "\"";
    t.description = get_string(j, "description", where, false);
    t.expected_output = get_string(j, "expected_output", where, false);
    t.agent_id = get_string(j, "agent_id", where, true);
    if (j.contains("dependencies")) {
        if (!j.at("dependencies").is_array()) {
            throw SpecParseError("key \"dependencies\" in " + where + " must be an array");
        }
        for (const auto& d : j.at("dependencies")) {
            if (!d.is_string()) {
                throw SpecParseError("entries of \"dependencies\" in " + where + " must be strings");
            }
            t.dependencies.push_back(d.get<std::string>());
        }
    }
    t.tools = get_string_set(j, "tools", where);
    return t;
}

bool blank(const std::string& s) { return normalize_text(s).empty(); }

}  // namespace

const AgentSpec* SystemSpec::find_agent(const std::string& agent_id) const {
    for (const auto& a : agents)
        if (a.agent_id == agent_id) return &a;
    return nullptr;
}

const TaskSpec* SystemSpec::find_task(const std::string& task_id) const {
    for (const auto& t : tasks)
        if (t.task_id == task_id) return &t;
    return nullptr;
}

std::string Validation::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.rule;
        if (!v.subject_id.empty()) os << " [" << v.subject_id << "]";
        if (!v.detail.empty()) os << ": " << v.detail;
        os << "\n";
    }
    return os.str();
}

Validation validate_spec(const SystemSpec& spec) {
    Validation result;
    auto add = [&](std::string subject, std::string rule, std::string detail) {
        result.violations.push_back({std::move(subject), std::move(rule), std::move(detail)});
    };

    if (spec.agents.empty()) add("", "no agents", "spec must declare at least one agent");
    if (spec.tasks.empty()) add("", "no tasks", "spec must declare at least one task");

    std::unordered_set<std::string> agent_ids;
    for (const auto& a : spec.agents) {
        if (blank(a.agent_id)) {
            add(a.agent_id, "empty agent_id", "");
            continue;
        }
        if (!agent_ids.insert(a.agent_id).second) add(a.agent_id, "duplicate agent_id", "");
        if (blank(a.role)) add(a.agent_id, "empty role", "");
    }

    std::unordered_set<std::string> task_ids;
    for (const auto& t : spec.tasks) {
        if (blank(t.task_id)) {
            add(t.task_id, "empty task_id", "");
            continue;
        }
        if (!task_ids.insert(t.task_id).second) add(t.task_id, "duplicate task_id", "");
    }

    for (const auto& t : spec.tasks) {
        if (!agent_ids.count(t.agent_id)) {
            add(t.task_id, "unknown agent reference", "agent \"" + t.agent_id + "\" does not exist");
        }
        std::unordered_set<std::string> seen_deps;
        for (const auto& d : t.dependencies) {
            if (d == t.task_id) {
                add(t.task_id, "self-dependency", "");
            } else if (!task_ids.count(d)) {
                add(t.task_id, "unresolved dependency", "task \"" + d + "\" does not exist");
            }
            if (!seen_deps.insert(d).second) {
                add(t.task_id, "duplicate dependency", "task \"" + d + "\" listed twice");
            }
        }
    }

    // Cycle check over resolvable edges (Kahn). Only run when references are
    // clean enough for indegrees to mean anything.
    bool refs_ok = true;
    for (const auto& v : result.violations) {
        if (v.rule == "unresolved dependency" || v.rule == "self-dependency" ||
            v.rule == "duplicate task_id" || v.rule == "empty task_id") {
            refs_ok = false;
        }
    }
    if (refs_ok && !spec.tasks.empty()) {
        std::unordered_map<std::string, int> indegree;
        std::unordered_map<std::string, std::vector<std::string>> dependents;
        for (const auto& t : spec.tasks) indegree[t.task_id] = 0;
        for (const auto& t : spec.tasks) {
            for (const auto& d : t.dependencies) {
                indegree[t.task_id]++;
                dependents[d].push_back(t.task_id);
            }
        }
        std::queue<std::string> ready;
        for (const auto& [id, deg] : indegree)
            if (deg == 0) ready.push(id);
        std::size_t done = 0;
        while (!ready.empty()) {
            std::string id = ready.front();
            ready.pop();
            ++done;
            for (const auto& next : dependents[id])
                if (--indegree[next] == 0) ready.push(next);
        }
        if (done != spec.tasks.size()) {
            std::vector<std::string> members;
            for (const auto& [id, deg] : indegree)
                if (deg > 0) members.push_back(id);
            std::sort(members.begin(), members.end());
            std::string detail = "tasks involved:";
            for (const auto& m : members) detail += " " + m;
            add(members.front(), "cycle", detail);
        }
    }

    return result;
}

void require_valid(const SystemSpec& spec, const std::string& context) {
    Validation v = validate_spec(spec);
    if (!v.ok()) {
        throw SpecValidationError(context + ": spec does not validate\n" + v.to_string());
    }
}

json spec_to_json(const SystemSpec& spec) {
    std::vector<AgentSpec> agents = spec.agents;
    std::vector<TaskSpec> tasks = spec.tasks;
    std::sort(agents.begin(), agents.end(),
              [](const AgentSpec& a, const AgentSpec& b) { return a.agent_id < b.agent_id; });
    std::sort(tasks.begin(), tasks.end(),
              [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; });

    json j;
    j["name"] = normalize_text(spec.name);
    j["objective"] = normalize_text(spec.objective);
    j["agents"] = json::array();
    for (const auto& a : agents) j["agents"].push_back(agent_to_json(a));
    j["tasks"] = json::array();
    for (const auto& t : tasks) j["tasks"].push_back(task_to_json(t));
    j["metadata"] = json::object();
    for (const auto& [k, v] : spec.metadata) j["metadata"][k] = normalize_text(v);
    return j;
}

SystemSpec spec_from_json(const json& j) {
    if (!j.is_object()) throw SpecParseError("spec document must be a JSON object");
    check_keys(j, {"name", "objective", "agents", "tasks", "metadata"}, "spec");
    SystemSpec spec;
    spec.name = get_string(j, "name", "spec", false);
    spec.objective = get_string(j, "objective", "spec", false);
    if (j.contains("agents")) {
        if (!j.at("agents").is_array()) throw SpecParseError("\"agents\" must be an array");
        for (const auto& a : j.at("agents")) spec.agents.push_back(agent_from_json(a));
    }
    if (j.contains("tasks")) {
        if (!j.at("tasks").is_array()) throw SpecParseError("\"tasks\" must be an array");
        for (const auto& t : j.at("tasks")) spec.tasks.push_back(task_from_json(t));
    }
    if (j.contains("metadata")) {
        if (!j.at("metadata").is_object()) throw SpecParseError("\"metadata\" must be an object");
        for (auto it = j.at("metadata").begin(); it != j.at("metadata").end(); ++it) {
            if (!it.value().is_string()) throw SpecParseError("metadata values must be strings");
            spec.metadata[it.key()] = it.value().get<std::string>();
        }
    }
    return spec;
}

SystemSpec parse_spec_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SpecParseError("spec document is not valid JSON");
    return spec_from_json(j);
}

SystemSpec load_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecParseError("cannot open spec file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spec_text(buf.str());
}

std::string canonicalize(const SystemSpec& spec) {
    require_valid(spec, "canonicalize");
    return spec_to_json(spec).dump(2) + "\n";
}

std::string spec_content_hash(const SystemSpec& spec) {
    return detail::sha256_hex(canonicalize(spec));
}

bool canonically_equal(const SystemSpec& a, const SystemSpec& b) {
    return spec_to_json(a) == spec_to_json(b);
}

const char* change_kind_name(ChangeKind kind) {
    switch (kind) {
        case ChangeKind::AddedAgent: return "AddedAgent";
        case ChangeKind::RemovedAgent: return "RemovedAgent";
        case ChangeKind::ModifiedAgent: return "ModifiedAgent";
        case ChangeKind::AddedTask: return "AddedTask";
        case ChangeKind::RemovedTask: return "RemovedTask";
        case ChangeKind::ModifiedTask: return "ModifiedTask";
        case ChangeKind::ModifiedInfo: return "ModifiedInfo";
    }
    return "?";
}

namespace {

std::string join_tools(const std::set<std::string>& tools) {
    std::string out;
    for (const auto& t : tools) {
        if (!out.empty()) out += ", ";
        out += t;
    }
    return out;
}

std::string join_list(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) {
        if (!out.empty()) out += ", ";
        out += x;
    }
    return out;
}

void push_delta(std::vector<FieldDelta>& fields, const std::string& name, const std::string& a,
                const std::string& b) {
    if (a != b) fields.push_back({name, a, b});
}

}  // namespace

std::vector<SpecChange> diff_specs(const SystemSpec& a, const SystemSpec& b) {
    require_valid(a, "diff_specs(a)");
    require_valid(b, "diff_specs(b)");

    // Compare canonical images so whitespace-only edits diff as empty.
    SystemSpec ca = spec_from_json(spec_to_json(a));
    SystemSpec cb = spec_from_json(spec_to_json(b));

    std::vector<SpecChange> changes;

    std::map<std::string, const AgentSpec*> agents_a, agents_b;
    for (const auto& x : ca.agents) agents_a[x.agent_id] = &x;
    for (const auto& x : cb.agents) agents_b[x.agent_id] = &x;

    for (const auto& [id, agent] : agents_b) {
        auto it = agents_a.find(id);
        if (it == agents_a.end()) {
            changes.push_back({ChangeKind::AddedAgent, id, {}, json(nullptr), agent_to_json(*agent)});
        } else if (!(*it->second == *agent)) {
            SpecChange c{ChangeKind::ModifiedAgent, id, {}, agent_to_json(*it->second),
                         agent_to_json(*agent)};
            push_delta(c.fields, "role", it->second->role, agent->role);
            push_delta(c.fields, "goal", it->second->goal, agent->goal);
            push_delta(c.fields, "backstory", it->second->backstory, agent->backstory);
            push_delta(c.fields, "tools", join_tools(it->second->tools), join_tools(agent->tools));
            changes.push_back(std::move(c));
        }
    }
    for (const auto& [id, agent] : agents_a) {
        if (!agents_b.count(id)) {
            changes.push_back({ChangeKind::RemovedAgent, id, {}, agent_to_json(*agent), json(nullptr)});
        }
    }

    std::map<std::string, const TaskSpec*> tasks_a, tasks_b;
    for (const auto& x : ca.tasks) tasks_a[x.task_id] = &x;
    for (const auto& x : cb.tasks) tasks_b[x.task_id] = &x;

    for (const auto& [id, task] : tasks_b) {
        auto it = tasks_a.find(id);
        if (it == tasks_a.end()) {
            changes.push_back({ChangeKind::AddedTask, id, {}, json(nullptr), task_to_json(*task)});
        } else if (!(*it->second == *task)) {
            SpecChange c{ChangeKind::ModifiedTask, id, {}, task_to_json(*it->second),
                         task_to_json(*task)};
            push_delta(c.fields, "description", it->second->description, task->description);
            push_delta(c.fields, "expected_output", it->second->expected_output,
                       task->expected_output);
            push_delta(c.fields, "agent_id", it->second->agent_id, task->agent_id);
            push_delta(c.fields, "dependencies", join_list(it->second->dependencies),
                       join_list(task->dependencies));
            push_delta(c.fields, "tools", join_tools(it->second->tools), join_tools(task->tools));
            changes.push_back(std::move(c));
        }
    }
    for (const auto& [id, task] : tasks_a) {
        if (!tasks_b.count(id)) {
            changes.push_back({ChangeKind::RemovedTask, id, {}, task_to_json(*task), json(nullptr)});
        }
    }

    if (ca.name != cb.name || ca.objective != cb.objective || ca.metadata != cb.metadata) {
        json before, after;
        before["name"] = ca.name;
        before["objective"] = ca.objective;
        before["metadata"] = ca.metadata;
        after["name"] = cb.name;
        after["objective"] = cb.objective;
        after["metadata"] = cb.metadata;
        SpecChange c{ChangeKind::ModifiedInfo, "", {}, before, after};
        push_delta(c.fields, "name", ca.name, cb.name);
        push_delta(c.fields, "objective", ca.objective, cb.objective);
        if (ca.metadata != cb.metadata) c.fields.push_back({"metadata", "", ""});
        changes.push_back(std::move(c));
    }

    return changes;
}

SystemSpec apply_changes(const SystemSpec& a, const std::vector<SpecChange>& changes) {
    SystemSpec out = spec_from_json(spec_to_json(a));
    for (const auto& c : changes) {
        switch (c.kind) {
            case ChangeKind::AddedAgent:
                out.agents.push_back(agent_from_json(c.after));
                break;
            case ChangeKind::RemovedAgent:
                std::erase_if(out.agents,
                              [&](const AgentSpec& x) { return x.agent_id == c.id; });
                break;
            case ChangeKind::ModifiedAgent:
                for (auto& x : out.agents)
                    if (x.agent_id == c.id) x = agent_from_json(c.after);
                break;
            case ChangeKind::AddedTask:
                out.tasks.push_back(task_from_json(c.after));
                break;
            case ChangeKind::RemovedTask:
                std::erase_if(out.tasks, [&](const TaskSpec& x) { return x.task_id == c.id; });
                break;
            case ChangeKind::ModifiedTask:
                for (auto& x : out.tasks)
                    if (x.task_id == c.id) x = task_from_json(c.after);
                break;
            case ChangeKind::ModifiedInfo:
                out.name = c.after.at("name").get<std::string>();
                out.objective = c.after.at("objective").get<std::string>();
                out.metadata.clear();
                for (auto it = c.after.at("metadata").begin(); it != c.after.at("metadata").end();
                     ++it) {
                    out.metadata[it.key()] = it.value().get<std::string>();
                }
                break;
        }
    }
    return out;
}

}  // namespace evolver
