#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace evolver {

// ==========================================================================
// Single choke point for LLM traffic. Two backends: a live HTTP client
// speaking the JSON chat-completions protocol, and a scripted client that
// replays canned responses for tests and deterministic replay.
// ==========================================================================

struct ProviderConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model_name = "llama-3.2-3b";
    std::string api_key;
    double temperature = 0.0;
    std::chrono::milliseconds request_timeout{30000};
    int max_retries = 2;
    std::optional<long> seed;

    /// Overlay EVOLVER_LLM_BASE_URL / EVOLVER_LLM_MODEL / EVOLVER_LLM_API_KEY
    /// onto the defaults.
    static ProviderConfig from_env();
};

struct ChatExchange {
    std::string system_prompt;
    std::string user_prompt;
    std::string response;
    double latency_ms = 0.0;

    nlohmann::json to_json() const;
    static ChatExchange from_json(const nlohmann::json& j);
};

/// Where completed exchanges go, in order, before the caller sees them.
using ExchangeSink = std::function<void(const ChatExchange&)>;

class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// Returns model text or throws GatewayError.
    virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                                 double temperature) = 0;
};

class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(ProviderConfig config);
    std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                         double temperature) override;

private:
    ProviderConfig config_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // anything after the authority
};

/// One scripted response. When `match` is set, the incoming user prompt
/// must contain it; a mismatch is a divergence, not a skip.
struct ScriptEntry {
    std::optional<std::string> match;
    std::string response;
};

class ScriptedLlmClient : public LlmClient {
public:
    explicit ScriptedLlmClient(std::vector<ScriptEntry> entries);

    /// Loads a JSON array of {match?: text, response: text}.
    static std::vector<ScriptEntry> load_script_file(const std::string& path);
    static std::vector<ScriptEntry> parse_script(const nlohmann::json& j);

    std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                         double temperature) override;

    std::size_t consumed() const;
    std::size_t remaining() const;

private:
    std::vector<ScriptEntry> entries_;
    std::size_t next_ = 0;
    mutable std::mutex mutex_;
};

enum class StructuredShape { CriteriaSet, EvaluationReport, HypothesisList };

const char* structured_shape_name(StructuredShape shape);

struct StructuredResult {
    nlohmann::json value;
    int retry_count = 0;  // repair prompts issued
};

/// Pulls the first fenced JSON block out of `text` (whole-text JSON as a
/// fallback). Returns nullopt when nothing parses.
std::optional<nlohmann::json> extract_json_block(const std::string& text);

class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmClient> client, ProviderConfig config,
               ExchangeSink sink = nullptr);

    /// One chat turn. The exchange is appended to the sink before the
    /// response is returned. Throws GatewayError on transport failure.
    std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                         std::optional<double> temperature = std::nullopt);

    /// Chat turn that must yield a JSON value of the given shape. On parse
    /// failure issues up to max_retries repair prompts quoting the parse
    /// error. Throws StructuredOutputError (carrying the raw text) when the
    /// model never complies.
    StructuredResult complete_structured(const std::string& system_prompt,
                                         const std::string& user_prompt, StructuredShape shape,
                                         std::optional<double> temperature = std::nullopt);

    const ProviderConfig& config() const { return config_; }
    void set_sink(ExchangeSink sink);

private:
    std::shared_ptr<LlmClient> client_;
    ProviderConfig config_;
    ExchangeSink sink_;
    std::mutex sink_mutex_;  // serializes log appends

    void record(ChatExchange exchange);
};

/// Shallow shape validation for structured responses; returns an error
/// message or nullopt. Field-level semantics stay with the consumers.
std::optional<std::string> structured_shape_error(StructuredShape shape,
                                                  const nlohmann::json& value);

}  // namespace evolver
