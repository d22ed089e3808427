#include "doctorrag/http_backend.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

namespace doctorrag {

namespace {

bool is_retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

struct SplitUrl {
    std::string origin;      // scheme://host[:port]
    std::string path_prefix; // possibly empty, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url must include a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, path_start);
        out.path_prefix = base_url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

std::optional<TokenUsage> parse_usage(const nlohmann::json& doc) {
    if (!doc.contains("usage") || !doc["usage"].is_object()) {
        return std::nullopt;
    }
    const auto& usage = doc["usage"];
    TokenUsage out;
    out.input_tokens = usage.value("prompt_tokens", 0ULL);
    out.output_tokens = usage.value("completion_tokens", 0ULL);
    return out;
}

} // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    SplitUrl url;
    httplib::Client client;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), url(split_base_url(config.base_url)),
          client(url.origin) {
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_write_timeout(config.timeout_seconds, 0);
        if (!config.api_key.empty()) {
            client.set_bearer_token_auth(config.api_key);
        }
    }

    std::string model_for(const std::string& key) const {
        auto it = config.models.find(key);
        if (it != config.models.end()) {
            return it->second;
        }
        it = config.models.find("default");
        if (it != config.models.end()) {
            return it->second;
        }
        throw ConfigError("no model configured for '" + key +
                          "' and no default model set");
    }

    nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body) {
        auto path = url.path_prefix + endpoint;
        auto result = client.Post(path, body.dump(), "application/json");
        if (!result) {
            throw TransportError("request to " + url.origin + path + " failed: " +
                                 httplib::to_string(result.error()));
        }
        if (is_retryable_status(result->status)) {
            throw TransportError("transient status " + std::to_string(result->status) +
                                 " from " + url.origin + path);
        }
        if (result->status < 200 || result->status >= 300) {
            throw BackendError(result->status, result->body,
                               "status " + std::to_string(result->status) +
                                   " from " + url.origin + path);
        }
        try {
            return nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(result->status, result->body,
                               std::string("unparseable response body: ") + e.what());
        }
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

BackendReply HttpBackend::chat(const ChatRequest& request) {
    nlohmann::json body{
        {"model", impl_->model_for(to_string(request.role))},
        {"temperature", request.temperature},
        {"messages",
         nlohmann::json::array({
             nlohmann::json{{"role", "system"}, {"content", request.system_message}},
             nlohmann::json{{"role", "user"}, {"content", request.user_message}},
         })},
    };
    if (request.system_message.empty()) {
        body["messages"].erase(0);
    }
    if (request.max_output_tokens > 0) {
        body["max_tokens"] = request.max_output_tokens;
    }
    auto doc = impl_->post_json("/chat/completions", body);
    if (!doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
        throw BackendError(200, doc.dump(), "chat response has no choices");
    }
    const auto& message = doc["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
        throw BackendError(200, doc.dump(), "chat response has no message content");
    }
    return BackendReply{message["content"].get<std::string>(), parse_usage(doc)};
}

std::vector<EmbedReply> HttpBackend::embed(const std::vector<std::string>& texts) {
    nlohmann::json body{
        {"model", impl_->model_for("embedding")},
        {"input", texts},
    };
    auto doc = impl_->post_json("/embeddings", body);
    if (!doc.contains("data") || !doc["data"].is_array()) {
        throw BackendError(200, doc.dump(), "embedding response has no data array");
    }
    const auto& data = doc["data"];
    if (data.size() != texts.size()) {
        throw BackendError(200, doc.dump(),
                           "embedding response count mismatch: expected " +
                               std::to_string(texts.size()) + ", got " +
                               std::to_string(data.size()));
    }
    // The protocol allows out-of-order items; restore input order by index.
    std::vector<EmbedReply> out(texts.size());
    auto usage = parse_usage(doc);
    for (const auto& item : data) {
        if (!item.contains("index") || !item.contains("embedding")) {
            throw BackendError(200, doc.dump(),
                               "embedding item missing index or embedding");
        }
        std::size_t index = item["index"].get<std::size_t>();
        if (index >= out.size()) {
            throw BackendError(200, doc.dump(),
                               "embedding index out of range: " + std::to_string(index));
        }
        out[index].values = item["embedding"].get<std::vector<float>>();
    }
    if (usage && !out.empty()) {
        // The batch usage is attributed to the first item; the gateway sums
        // per-batch anyway.
        out[0].usage = usage;
    }
    return out;
}

} // namespace doctorrag
