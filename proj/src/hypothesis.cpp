#include "evolver/hypothesis.hpp"

#include <array>

#include "evolver/errors.hpp"

namespace evolver {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 9> kKindNames = {
    "AddAgent",     "ModifyAgent",   "RemoveAgent",
    "AddTask",      "RedefineTask",  "ReassignTask",
    "AddDependency", "RemoveDependency", "SetTools",
};

bool has_string(const json& p, const char* key) {
    return p.contains(key) && p.at(key).is_string() &&
           !p.at(key).get<std::string>().empty();
}

bool optional_string(const json& p, const char* key) {
    return !p.contains(key) || p.at(key).is_string();
}

bool optional_string_array(const json& p, const char* key) {
    if (!p.contains(key)) return true;
    if (!p.at(key).is_array()) return false;
    for (const auto& v : p.at(key))
        if (!v.is_string()) return false;
    return true;
}

}  // namespace

const char* hypothesis_kind_name(HypothesisKind kind) {
    return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<HypothesisKind> parse_hypothesis_kind(const std::string& name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (name == kKindNames[i]) return static_cast<HypothesisKind>(i);
    }
    return std::nullopt;
}

json Hypothesis::to_json() const {
    json j;
    j["kind"] = hypothesis_kind_name(kind);
    j["payload"] = payload;
    j["rationale"] = rationale;
    return j;
}

std::optional<std::string> hypothesis_shape_error(const Hypothesis& h) {
    const json& p = h.payload;
    if (!p.is_object()) return "payload must be an object";
    if (h.rationale.empty()) return "rationale must be nonempty";

    switch (h.kind) {
        case HypothesisKind::AddAgent:
            if (!has_string(p, "agent_id")) return "AddAgent payload needs agent_id";
            if (!has_string(p, "role")) return "AddAgent payload needs role";
            if (!optional_string(p, "goal")) return "goal must be a string";
            if (!optional_string(p, "backstory")) return "backstory must be a string";
            if (!optional_string_array(p, "tools")) return "tools must be a string array";
            return std::nullopt;
        case HypothesisKind::ModifyAgent:
            if (!has_string(p, "agent_id")) return "ModifyAgent payload needs agent_id";
            if (!optional_string(p, "role") || !optional_string(p, "goal") ||
                !optional_string(p, "backstory")) {
                return "agent fields must be strings";
            }
            if (!optional_string_array(p, "tools")) return "tools must be a string array";
            return std::nullopt;
        case HypothesisKind::RemoveAgent:
            if (!has_string(p, "agent_id")) return "RemoveAgent payload needs agent_id";
            return std::nullopt;
        case HypothesisKind::AddTask:
            if (!has_string(p, "task_id")) return "AddTask payload needs task_id";
            if (!has_string(p, "agent_id")) return "AddTask payload needs agent_id";
            if (!optional_string(p, "description") || !optional_string(p, "expected_output")) {
                return "task fields must be strings";
            }
            if (!optional_string_array(p, "dependencies")) {
                return "dependencies must be a string array";
            }
            if (!optional_string_array(p, "tools")) return "tools must be a string array";
            return std::nullopt;
        case HypothesisKind::RedefineTask:
            if (!has_string(p, "task_id")) return "RedefineTask payload needs task_id";
            if (!optional_string(p, "description") || !optional_string(p, "expected_output") ||
                !optional_string(p, "agent_id")) {
                return "task fields must be strings";
            }
            if (!optional_string_array(p, "dependencies")) {
                return "dependencies must be a string array";
            }
            if (!optional_string_array(p, "tools")) return "tools must be a string array";
            return std::nullopt;
        case HypothesisKind::ReassignTask:
            if (!has_string(p, "task_id")) return "ReassignTask payload needs task_id";
            if (!has_string(p, "agent_id")) return "ReassignTask payload needs agent_id";
            return std::nullopt;
        case HypothesisKind::AddDependency:
        case HypothesisKind::RemoveDependency:
            if (!has_string(p, "task_id")) return "dependency payload needs task_id";
            if (!has_string(p, "depends_on")) return "dependency payload needs depends_on";
            return std::nullopt;
        case HypothesisKind::SetTools: {
            bool on_agent = has_string(p, "agent_id");
            bool on_task = has_string(p, "task_id");
            if (on_agent == on_task) {
                return "SetTools payload needs exactly one of agent_id or task_id";
            }
            if (!p.contains("tools") || !optional_string_array(p, "tools")) {
                return "SetTools payload needs a tools string array";
            }
            return std::nullopt;
        }
    }
    return "unknown kind";
}

Hypothesis hypothesis_from_json(const json& j) {
    if (!j.is_object()) throw SpecParseError("hypothesis must be an object");
    if (!j.contains("kind") || !j.at("kind").is_string()) {
        throw SpecParseError("hypothesis needs a string \"kind\"");
    }
    auto kind = parse_hypothesis_kind(j.at("kind").get<std::string>());
    if (!kind) {
        throw SpecParseError("unknown hypothesis kind \"" + j.at("kind").get<std::string>() + "\"");
    }
    Hypothesis h;
    h.kind = *kind;
    h.payload = j.contains("payload") ? j.at("payload") : json::object();
    if (j.contains("rationale")) {
        if (!j.at("rationale").is_string()) throw SpecParseError("rationale must be a string");
        h.rationale = j.at("rationale").get<std::string>();
    }
    return h;
}

json HypothesisSet::to_json() const {
    json j;
    j["hypotheses"] = json::array();
    for (const auto& h : hypotheses) j["hypotheses"].push_back(h.to_json());
    j["source_evaluation"] = source_evaluation;
    return j;
}

HypothesisSet hypothesis_set_from_json(const json& j) {
    if (!j.is_object()) throw SpecParseError("hypothesis set must be an object");
    HypothesisSet set;
    if (j.contains("source_evaluation") && j.at("source_evaluation").is_string()) {
        set.source_evaluation = j.at("source_evaluation").get<std::string>();
    }
    if (!j.contains("hypotheses") || !j.at("hypotheses").is_array()) {
        throw SpecParseError("hypothesis set needs a \"hypotheses\" array");
    }
    for (const auto& h : j.at("hypotheses")) set.hypotheses.push_back(hypothesis_from_json(h));
    return set;
}

}  // namespace evolver
