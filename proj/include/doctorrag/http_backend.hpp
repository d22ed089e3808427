#pragma once

#include <map>
#include <memory>
#include <string>

#include "doctorrag/gateway.hpp"

namespace doctorrag {

struct HttpBackendConfig {
    // Scheme, host, optional port, optional path prefix,
    // e.g. "https://api.example.com/v1".
    std::string base_url;
    // Bearer token; supplied by the caller from an environment variable,
    // never read from configuration files.
    std::string api_key;
    // Model per role name, with "default" as the fallback; "embedding"
    // selects the embedding model.
    std::map<std::string, std::string> models;
    int timeout_seconds = 120;
};

// Chat-completions and embeddings client for any service speaking the
// OpenAI-compatible JSON protocol. Connection failures and 408/429/5xx
// statuses surface as TransportError so the gateway retries them; other
// non-2xx statuses surface as BackendError with status and body.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    BackendReply chat(const ChatRequest& request) override;
    std::vector<EmbedReply> embed(const std::vector<std::string>& texts) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace doctorrag
