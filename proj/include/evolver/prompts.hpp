#pragma once

#include <map>
#include <string>

namespace evolver {

/// The three prompt templates the pipeline uses, with {placeholder}
/// substitution. Built-in texts are the defaults; a prompts/ directory
/// (or EVOLVER_PROMPTS_DIR) overrides them file by file, so operators can
/// version and tune prompts without rebuilding.
struct PromptLibrary {
    std::string judge;            // prompts/judge.txt
    std::string derive_criteria;  // prompts/derive_criteria.txt
    std::string hypothesize;      // prompts/hypothesize.txt

    static PromptLibrary builtin();

    /// Reads the template files from `dir`; missing files keep the
    /// built-in text.
    static PromptLibrary from_dir(const std::string& dir);

    /// EVOLVER_PROMPTS_DIR if set, else ./prompts if present, else builtin.
    static PromptLibrary resolve();
};

/// Replaces every {key} occurrence; unknown placeholders are left alone.
std::string render_prompt(const std::string& template_text,
                          const std::map<std::string, std::string>& values);

}  // namespace evolver
