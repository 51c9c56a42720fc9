#include "autoskill/model_client.hpp"

#include <httplib.h>

namespace autoskill {

ModelResponse parse_model_response(const ojson& j) {
    ModelResponse resp;
    resp.text = j.value("text", "");
    for (const auto& call : j.value("tool_calls", ojson::array())) {
        ToolCall tc;
        tc.name = call.value("name", "");
        if (call.contains("arguments")) {
            const auto& args = call["arguments"];
            tc.arguments = args.is_string() ? args.get<std::string>() : args.dump();
        } else {
            tc.arguments = "{}";
        }
        resp.tool_calls.push_back(std::move(tc));
    }
    if (j.contains("usage")) {
        resp.usage.fresh_in = j["usage"].value("fresh_in", 0L);
        resp.usage.cached_in = j["usage"].value("cached_in", 0L);
        resp.usage.output = j["usage"].value("output", 0L);
    }
    return resp;
}

ScriptedModelClient ScriptedModelClient::from_file(const fs::path& fixture) {
    ojson j;
    try {
        j = ojson::parse(read_file(fixture));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::usage_error, "bad scripted fixture " + fixture.string() + ": " + e.what());
    }
    return from_json(j);
}

ScriptedModelClient ScriptedModelClient::from_json(const ojson& fixture) {
    ScriptedModelClient client;
    client.model_id_ = fixture.value("model_id", "scripted");
    for (const auto& turn : fixture.value("turns", ojson::array())) {
        std::vector<ojson> responses;
        if (turn.contains("responses")) {
            for (const auto& r : turn["responses"]) responses.push_back(r);
        } else {
            responses.push_back(turn);
        }
        client.turns_.push_back(std::move(responses));
    }
    return client;
}

ModelResponse ScriptedModelClient::request(const ModelRequest& req) {
    if (req.turn_index != current_turn_) {
        current_turn_ = req.turn_index;
        offset_ = 0;
        fail_remaining_ = 0;
    }
    if (fail_remaining_ > 0) {
        --fail_remaining_;
        if (fail_transient_) throw ModelTransientError("scripted transient failure");
        throw ModelPermanentError("scripted permanent failure");
    }
    if (current_turn_ < 1 || static_cast<std::size_t>(current_turn_) > turns_.size())
        throw ModelPermanentError("scripted model has no turn " + std::to_string(current_turn_));
    const auto& responses = turns_[static_cast<std::size_t>(current_turn_) - 1];
    if (offset_ >= responses.size())
        throw ModelPermanentError("scripted model exhausted at turn " +
                                  std::to_string(current_turn_));
    const ojson& r = responses[offset_++];
    if (r.contains("fail")) {
        fail_transient_ = r["fail"].get<std::string>() == "transient";
        fail_remaining_ = r.value("times", 1) - 1;
        if (fail_transient_) throw ModelTransientError("scripted transient failure");
        throw ModelPermanentError("scripted permanent failure");
    }
    return parse_model_response(r);
}

RemoteModelClient::RemoteModelClient(std::string endpoint, std::string model_id,
                                     std::string api_key, std::chrono::seconds default_timeout)
    : endpoint_(std::move(endpoint)),
      model_id_(std::move(model_id)),
      api_key_(std::move(api_key)),
      default_timeout_(default_timeout) {
    if (endpoint_.empty())
        throw Error(ErrorCode::usage_error, "remote model requires an endpoint in config");
}

ModelResponse RemoteModelClient::request(const ModelRequest& req) {
    // split endpoint into host part and path
    std::string url = endpoint_;
    std::string scheme_host = url;
    std::string path = "/";
    size_t scheme = url.find("://");
    size_t path_start = std::string::npos;
    if (scheme != std::string::npos) path_start = url.find('/', scheme + 3);
    if (path_start != std::string::npos) {
        scheme_host = url.substr(0, path_start);
        path = url.substr(path_start);
    }

    httplib::Client client(scheme_host);
    auto timeout = req.timeout.count() > 0 ? req.timeout : default_timeout_;
    client.set_connection_timeout(timeout.count(), 0);
    client.set_read_timeout(timeout.count(), 0);
    client.set_write_timeout(timeout.count(), 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    ojson body;
    body["model"] = model_id_;
    body["system"] = req.system_prompt;
    body["turn_index"] = req.turn_index;
    body["purpose"] = req.purpose;
    body["messages"] = req.messages;
    body["tools"] = req.tools;

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result)
        throw ModelTransientError("transport error: " + httplib::to_string(result.error()));
    if (result->status == 429 || result->status >= 500)
        throw ModelTransientError("HTTP " + std::to_string(result->status));
    if (result->status != 200)
        throw ModelPermanentError("HTTP " + std::to_string(result->status) + ": " + result->body);

    try {
        return parse_model_response(ojson::parse(result->body));
    } catch (const nlohmann::json::exception& e) {
        throw ModelPermanentError(std::string("malformed model response: ") + e.what());
    }
}

}  // namespace autoskill
