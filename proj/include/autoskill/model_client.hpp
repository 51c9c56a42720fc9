#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "autoskill/context_dag.hpp"
#include "autoskill/errors.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

// One request per model call. `messages` is the serialized active chain;
// `turn_index` is the 1-based loop turn the call belongs to and `purpose`
// distinguishes the main turn call from summarization, verification, and
// skill-generation calls.
struct ModelRequest {
    std::string system_prompt;
    ojson messages = ojson::array();
    ojson tools = ojson::array();
    int turn_index = 1;
    std::string purpose = "turn";
    std::chrono::seconds timeout{0};  // 0: client default
};

struct ModelResponse {
    std::string text;
    std::vector<ToolCall> tool_calls;
    TokenUsage usage;
};

// Thrown by clients; the retry wrapper only retries transient failures.
class ModelTransientError : public Error {
public:
    explicit ModelTransientError(const std::string& msg)
        : Error(ErrorCode::model_transient_failure, msg) {}
};

class ModelPermanentError : public Error {
public:
    explicit ModelPermanentError(const std::string& msg)
        : Error(ErrorCode::model_permanent_failure, msg) {}
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual ModelResponse request(const ModelRequest& req) = 0;
    virtual std::string model_id() const = 0;
};

// Deterministic stand-in that replays canned responses from a fixture.
//
// Fixture format (JSON):
//   {
//     "model_id": "scripted",
//     "turns": [
//       {"responses": [RESPONSE, ...]},   // consumed in order within the turn
//       RESPONSE,                          // shorthand: single-response turn
//       ...
//     ]
//   }
// RESPONSE is either
//   {"text": "...", "tool_calls": [{"name": "...", "arguments": {...}}],
//    "usage": {"fresh_in": N, "cached_in": N, "output": N}}
// or a failure injection {"fail": "transient" | "permanent", "times": N}.
//
// Responses are keyed by the request's turn_index: the same turn consumes
// its list sequentially, which keeps replays deterministic across resume.
class ScriptedModelClient : public ModelClient {
public:
    static ScriptedModelClient from_file(const fs::path& fixture);
    static ScriptedModelClient from_json(const ojson& fixture);

    ModelResponse request(const ModelRequest& req) override;
    std::string model_id() const override { return model_id_; }

private:
    std::string model_id_ = "scripted";
    std::vector<std::vector<ojson>> turns_;
    int current_turn_ = 0;
    std::size_t offset_ = 0;
    int fail_remaining_ = 0;
    bool fail_transient_ = false;
};

// Minimal HTTP JSON client. POSTs the request to the configured endpoint and
// classifies 429/5xx/transport errors as transient, other non-200s as
// permanent. Wire format is documented in the README.
class RemoteModelClient : public ModelClient {
public:
    RemoteModelClient(std::string endpoint, std::string model_id, std::string api_key,
                      std::chrono::seconds default_timeout);

    ModelResponse request(const ModelRequest& req) override;
    std::string model_id() const override { return model_id_; }

private:
    std::string endpoint_;
    std::string model_id_;
    std::string api_key_;
    std::chrono::seconds default_timeout_;
};

// Parses a response body shared by both clients.
ModelResponse parse_model_response(const ojson& j);

}  // namespace autoskill
