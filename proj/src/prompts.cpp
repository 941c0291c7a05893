#include "evolver/prompts.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace evolver {

namespace {

constexpr const char* kJudge = R"(You are a strict evaluator of multi-agent system outputs. Judge the output below on a single criterion and nothing else.

Criterion: {criterion_name}
Definition: {criterion_description}

Output to evaluate:
{output}

Reply with a fenced JSON block and no other commentary:
```json
{"score": 0.0, "rationale": "one short paragraph explaining the score"}
```
The score must be a number between 0 and 1, where 1 fully satisfies the criterion.
)";

constexpr const char* kDeriveCriteria = R"(You are configuring the evaluation stage of an automated refinement pipeline for a multi-agent system.

System objective:
{objective}

Agents:
{agents}

Tasks:
{tasks}

Propose evaluation criteria tailored to this system's output. Use short snake_case names. Reply with a fenced JSON block and no other commentary:
```json
{"qualitative": [{"name": "example_criterion", "description": "what a high score means", "weight": 1.0}]}
```
)";

constexpr const char* kHypothesize = R"(You are refining a multi-agent system. Propose structured modification hypotheses that would improve its weakest evaluation criteria.

Current system spec:
{spec}

Latest evaluation, weakest criteria first:
{scores}

Each hypothesis is one JSON object:
{schema}

Reply with a fenced JSON block containing an array of 1 to 5 hypothesis objects, most promising first, and no other commentary:
```json
[{"kind": "AddAgent", "payload": {"agent_id": "...", "role": "...", "goal": "...", "tools": []}, "rationale": "..."}]
```
)";

std::string read_if_exists(const std::filesystem::path& path, const char* fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

PromptLibrary PromptLibrary::builtin() {
    return PromptLibrary{kJudge, kDeriveCriteria, kHypothesize};
}

PromptLibrary PromptLibrary::from_dir(const std::string& dir) {
    std::filesystem::path base(dir);
    PromptLibrary lib;
    lib.judge = read_if_exists(base / "judge.txt", kJudge);
    lib.derive_criteria = read_if_exists(base / "derive_criteria.txt", kDeriveCriteria);
    lib.hypothesize = read_if_exists(base / "hypothesize.txt", kHypothesize);
    return lib;
}

PromptLibrary PromptLibrary::resolve() {
    if (const char* dir = std::getenv("EVOLVER_PROMPTS_DIR")) return from_dir(dir);
    if (std::filesystem::is_directory("prompts")) return from_dir("prompts");
    return builtin();
}

std::string render_prompt(const std::string& template_text,
                          const std::map<std::string, std::string>& values) {
    std::string out = template_text;
    for (const auto& [key, value] : values) {
        const std::string placeholder = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace evolver
