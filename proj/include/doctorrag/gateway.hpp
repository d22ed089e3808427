#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "doctorrag/embedding.hpp"
#include "doctorrag/error.hpp"

namespace doctorrag {

// Closed set of chat roles. Every request carries one so that usage can be
// attributed to the pipeline stage that issued it.
enum class RoleTag {
    generator,
    context_criterion,
    patient_criterion,
    grad_answer_kc,
    grad_answer_pc,
    grad_prompt_kc,
    grad_prompt_pc,
    tgd,
    declarative,
    tagger,
    judge,
};

inline constexpr std::size_t kRoleCount = 11;

const char* to_string(RoleTag role);
std::optional<RoleTag> role_from_string(std::string_view name);

struct ChatRequest {
    RoleTag role = RoleTag::generator;
    std::string system_message;
    std::string user_message; // must be non-empty
    double temperature = 0.0;
    int max_output_tokens = 0; // 0 = backend default
};

struct TokenUsage {
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
};

struct ChatResult {
    std::string text;
    TokenUsage usage;
    int attempts = 1;
};

// Raw backend reply; usage is absent when the backend does not report it and
// is then estimated from character counts.
struct BackendReply {
    std::string text;
    std::optional<TokenUsage> usage;
};

struct EmbedReply {
    std::vector<float> values;
    std::optional<TokenUsage> usage;
};

// Transport to a concrete model provider. Implementations must be safe to
// call from multiple threads.
class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendReply chat(const ChatRequest& request) = 0;
    virtual std::vector<EmbedReply> embed(const std::vector<std::string>& texts) = 0;
};

struct UsageCounters {
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
    std::uint64_t requests = 0;
};

// Thread-safe per-role accounting. Totals are computed by summation, so
// total == sum over roles holds by construction; requests count every
// physical attempt, successful or not. Embedding traffic is tracked in a
// dedicated slot outside the chat role set.
class UsageLedger {
public:
    void record_attempt(RoleTag role);
    void record_chat_usage(RoleTag role, const TokenUsage& usage);
    void record_embedding(const TokenUsage& usage, std::uint64_t attempts);

    UsageCounters for_role(RoleTag role) const;
    UsageCounters embedding() const;
    UsageCounters total() const;
    // Keys: role names plus "embedding"; slots with zero requests are included.
    std::map<std::string, UsageCounters> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::array<UsageCounters, kRoleCount + 1> slots_{};
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_delay{100};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{2000};
};

struct GatewayConfig {
    RetryPolicy retry;
    int concurrency_cap = 4;
    // Expected embedding dimension; 0 accepts whatever the backend returns.
    int dimension = 0;
};

// Front door for all model traffic: applies bounded-retry on transient
// failures, enforces the in-flight concurrency cap, validates embedding
// dimensions, and records every attempt in the ledger.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {});

    // Throws TransportError after retries are exhausted on transient
    // failures; BackendError and ModelOutputError pass through unretried.
    ChatResult chat(const ChatRequest& request);

    EmbeddingVector embed(const std::string& text);
    // Returns one vector per input text, in input order.
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    const UsageLedger& ledger() const noexcept { return ledger_; }
    int dimension() const noexcept { return config_.dimension; }

private:
    class Slot;

    std::shared_ptr<Backend> backend_;
    GatewayConfig config_;
    UsageLedger ledger_;

    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    int in_flight_ = 0;

    void acquire_slot();
    void release_slot();
    std::chrono::milliseconds backoff_delay(int attempt) const;
};

} // namespace doctorrag
