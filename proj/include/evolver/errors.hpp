#pragma once

#include <stdexcept>
#include <string>

namespace evolver {

/// Spec file does not match the schema (wrong types, unknown keys, ...).
class SpecParseError : public std::runtime_error {
public:
    explicit SpecParseError(const std::string& what) : std::runtime_error(what) {}
};

/// An operation whose precondition is a valid spec received an invalid one.
class SpecValidationError : public std::runtime_error {
public:
    explicit SpecValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Transport-level LLM failure: timeout, connection error, script exhausted.
class GatewayError : public std::runtime_error {
public:
    explicit GatewayError(const std::string& what) : std::runtime_error(what) {}
};

/// A scripted exchange did not match what the script expected.
class ScriptMismatchError : public GatewayError {
public:
    ScriptMismatchError(const std::string& what, std::size_t exchange_index)
        : GatewayError(what), exchange_index(exchange_index) {}
    std::size_t exchange_index;
};

/// The model never produced machine-readable output, even after repair prompts.
class StructuredOutputError : public std::runtime_error {
public:
    StructuredOutputError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_text(std::move(raw)) {}
    std::string raw_text;
};

/// Run-store I/O failure; aborts the run.
class StoreError : public std::runtime_error {
public:
    explicit StoreError(const std::string& what) : std::runtime_error(what) {}
};

/// A report references artifacts that are missing from the store.
class ReportError : public std::runtime_error {
public:
    explicit ReportError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace evolver
