#include "evolver/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "evolver/errors.hpp"

namespace evolver {

using nlohmann::json;

ProviderConfig ProviderConfig::from_env() {
    ProviderConfig cfg;
    if (const char* v = std::getenv("EVOLVER_LLM_BASE_URL")) cfg.base_url = v;
    if (const char* v = std::getenv("EVOLVER_LLM_MODEL")) cfg.model_name = v;
    if (const char* v = std::getenv("EVOLVER_LLM_API_KEY")) cfg.api_key = v;
    return cfg;
}

json ChatExchange::to_json() const {
    json j;
    j["system"] = system_prompt;
    j["user"] = user_prompt;
    j["response"] = response;
    j["latency_ms"] = latency_ms;
    return j;
}

ChatExchange ChatExchange::from_json(const json& j) {
    ChatExchange e;
    e.system_prompt = j.value("system", "");
    e.user_prompt = j.value("user", "");
    e.response = j.value("response", "");
    e.latency_ms = j.value("latency_ms", 0.0);
    return e;
}

// --------------------------------------------------------------------------
// HTTP backend: POST {base_url}/v1/chat/completions
// --------------------------------------------------------------------------

HttpLlmClient::HttpLlmClient(ProviderConfig config) : config_(std::move(config)) {
    const std::string& url = config_.base_url;
    auto scheme_end = url.find("://");
    std::size_t authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', authority_start);
    if (path_start == std::string::npos) {
        host_ = url;
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string HttpLlmClient::complete(const std::string& system_prompt,
                                    const std::string& user_prompt, double temperature) {
    json body;
    body["model"] = config_.model_name;
    body["temperature"] = temperature;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", system_prompt}},
        json{{"role", "user"}, {"content", user_prompt}},
    });
    if (config_.seed) body["seed"] = *config_.seed;

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    const std::string path = path_prefix_ + "/v1/chat/completions";
    std::string last_error;

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        // A client per request keeps concurrent callers independent.
        httplib::Client client(host_);
        auto timeout = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout);
        client.set_connection_timeout(std::max<long>(1, timeout.count()), 0);
        client.set_read_timeout(std::max<long>(1, timeout.count()), 0);

        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
        } else {
            json reply = json::parse(res->body, nullptr, false);
            if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
                !reply["choices"][0].contains("message")) {
                last_error = "malformed completion body";
            } else {
                return reply["choices"][0]["message"].value("content", "");
            }
        }
        if (attempt < config_.max_retries) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * (attempt + 1)));
        }
    }
    throw GatewayError("chat completion failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

// --------------------------------------------------------------------------
// Scripted backend
// --------------------------------------------------------------------------

ScriptedLlmClient::ScriptedLlmClient(std::vector<ScriptEntry> entries)
    : entries_(std::move(entries)) {}

std::vector<ScriptEntry> ScriptedLlmClient::parse_script(const json& j) {
    if (!j.is_array()) throw GatewayError("script must be a JSON array");
    std::vector<ScriptEntry> entries;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("response") || !e.at("response").is_string()) {
            throw GatewayError("script entries need a string \"response\"");
        }
        ScriptEntry entry;
        entry.response = e.at("response").get<std::string>();
        if (e.contains("match")) {
            if (!e.at("match").is_string()) throw GatewayError("script \"match\" must be a string");
            entry.match = e.at("match").get<std::string>();
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<ScriptEntry> ScriptedLlmClient::load_script_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GatewayError("cannot open script file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw GatewayError("script file is not valid JSON: " + path);
    return parse_script(j);
}

std::string ScriptedLlmClient::complete(const std::string& system_prompt,
                                        const std::string& user_prompt, double /*temperature*/) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (next_ >= entries_.size()) {
        throw GatewayError("script exhausted after " + std::to_string(entries_.size()) +
                           " exchanges");
    }
    const ScriptEntry& entry = entries_[next_];
    if (entry.match && user_prompt.find(*entry.match) == std::string::npos &&
        system_prompt.find(*entry.match) == std::string::npos) {
        throw ScriptMismatchError("script mismatch at exchange " + std::to_string(next_) +
                                      ": expected prompt containing \"" + *entry.match + "\"",
                                  next_);
    }
    ++next_;
    return entry.response;
}

std::size_t ScriptedLlmClient::consumed() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return next_;
}

std::size_t ScriptedLlmClient::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size() - next_;
}

// --------------------------------------------------------------------------
// Gateway
// --------------------------------------------------------------------------

const char* structured_shape_name(StructuredShape shape) {
    switch (shape) {
        case StructuredShape::CriteriaSet: return "criteria-set";
        case StructuredShape::EvaluationReport: return "evaluation-report";
        case StructuredShape::HypothesisList: return "hypothesis-list";
    }
    return "?";
}

std::optional<json> extract_json_block(const std::string& text) {
    auto fence = text.find("```");
    if (fence != std::string::npos) {
        auto content_start = text.find('\n', fence);
        if (content_start != std::string::npos) {
            auto fence_end = text.find("```", content_start);
            if (fence_end != std::string::npos) {
                std::string block = text.substr(content_start + 1, fence_end - content_start - 1);
                json j = json::parse(block, nullptr, false);
                if (!j.is_discarded()) return j;
            }
        }
    }
    json whole = json::parse(text, nullptr, false);
    if (!whole.is_discarded()) return whole;
    return std::nullopt;
}

std::optional<std::string> structured_shape_error(StructuredShape shape, const json& value) {
    switch (shape) {
        case StructuredShape::CriteriaSet: {
            if (!value.is_object()) return "criteria-set must be an object";
            for (const char* key : {"qualitative", "quantitative"}) {
                if (!value.contains(key)) continue;
                if (!value.at(key).is_array()) return std::string(key) + " must be an array";
                for (const auto& c : value.at(key)) {
                    if (!c.is_object() || !c.contains("name") || !c.at("name").is_string()) {
                        return std::string(key) + " entries need a string \"name\"";
                    }
                }
            }
            return std::nullopt;
        }
        case StructuredShape::EvaluationReport: {
            if (!value.is_object()) return "evaluation must be an object";
            if (!value.contains("score") || !value.at("score").is_number()) {
                return "evaluation needs a numeric \"score\"";
            }
            if (value.contains("rationale") && !value.at("rationale").is_string()) {
                return "\"rationale\" must be a string";
            }
            return std::nullopt;
        }
        case StructuredShape::HypothesisList: {
            if (!value.is_array()) return "hypothesis list must be an array";
            for (const auto& h : value) {
                if (!h.is_object()) return "hypothesis entries must be objects";
            }
            return std::nullopt;
        }
    }
    return "unknown shape";
}

LlmGateway::LlmGateway(std::shared_ptr<LlmClient> client, ProviderConfig config, ExchangeSink sink)
    : client_(std::move(client)), config_(std::move(config)), sink_(std::move(sink)) {}

void LlmGateway::set_sink(ExchangeSink sink) {
    std::lock_guard<std::mutex> lock(sink_mutex_);
    sink_ = std::move(sink);
}

void LlmGateway::record(ChatExchange exchange) {
    std::lock_guard<std::mutex> lock(sink_mutex_);
    if (sink_) sink_(exchange);
}

std::string LlmGateway::complete(const std::string& system_prompt, const std::string& user_prompt,
                                 std::optional<double> temperature) {
    auto t0 = std::chrono::steady_clock::now();
    std::string response =
        client_->complete(system_prompt, user_prompt, temperature.value_or(config_.temperature));
    auto t1 = std::chrono::steady_clock::now();

    ChatExchange exchange;
    exchange.system_prompt = system_prompt;
    exchange.user_prompt = user_prompt;
    exchange.response = response;
    exchange.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    record(std::move(exchange));
    return response;
}

StructuredResult LlmGateway::complete_structured(const std::string& system_prompt,
                                                 const std::string& user_prompt,
                                                 StructuredShape shape,
                                                 std::optional<double> temperature) {
    std::string prompt = user_prompt;
    std::string last_raw;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        last_raw = complete(system_prompt, prompt, temperature);
        auto parsed = extract_json_block(last_raw);
        std::string error;
        if (!parsed) {
            error = "no parseable JSON found";
        } else {
            auto shape_error = structured_shape_error(shape, *parsed);
            if (!shape_error) return {*parsed, attempt};
            error = *shape_error;
        }
        prompt = "Your previous reply could not be used: " + error +
                 ".\nReply again with only a fenced ```json block of shape \"" +
                 structured_shape_name(shape) + "\".\n\nOriginal request:\n" + user_prompt;
    }
    throw StructuredOutputError("no valid " + std::string(structured_shape_name(shape)) +
                                    " after " + std::to_string(config_.max_retries) + " repairs",
                                last_raw);
}

}  // namespace evolver
