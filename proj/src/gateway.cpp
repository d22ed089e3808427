#include "doctorrag/gateway.hpp"

#include <cmath>
#include <thread>

#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

constexpr std::size_t kEmbeddingSlot = kRoleCount;

const char* kRoleNames[kRoleCount] = {
    "generator",         "context_criterion", "patient_criterion",
    "grad_answer_kc",    "grad_answer_pc",    "grad_prompt_kc",
    "grad_prompt_pc",    "tgd",               "declarative",
    "tagger",            "judge",
};

} // namespace

const char* to_string(RoleTag role) {
    return kRoleNames[static_cast<std::size_t>(role)];
}

std::optional<RoleTag> role_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kRoleCount; ++i) {
        if (name == kRoleNames[i]) {
            return static_cast<RoleTag>(i);
        }
    }
    return std::nullopt;
}

void UsageLedger::record_attempt(RoleTag role) {
    std::lock_guard<std::mutex> lock(mutex_);
    slots_[static_cast<std::size_t>(role)].requests += 1;
}

void UsageLedger::record_chat_usage(RoleTag role, const TokenUsage& usage) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& slot = slots_[static_cast<std::size_t>(role)];
    slot.input_tokens += usage.input_tokens;
    slot.output_tokens += usage.output_tokens;
}

void UsageLedger::record_embedding(const TokenUsage& usage, std::uint64_t attempts) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& slot = slots_[kEmbeddingSlot];
    slot.input_tokens += usage.input_tokens;
    slot.output_tokens += usage.output_tokens;
    slot.requests += attempts;
}

UsageCounters UsageLedger::for_role(RoleTag role) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return slots_[static_cast<std::size_t>(role)];
}

UsageCounters UsageLedger::embedding() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return slots_[kEmbeddingSlot];
}

UsageCounters UsageLedger::total() const {
    std::lock_guard<std::mutex> lock(mutex_);
    UsageCounters sum;
    for (const auto& slot : slots_) {
        sum.input_tokens += slot.input_tokens;
        sum.output_tokens += slot.output_tokens;
        sum.requests += slot.requests;
    }
    return sum;
}

std::map<std::string, UsageCounters> UsageLedger::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<std::string, UsageCounters> out;
    for (std::size_t i = 0; i < kRoleCount; ++i) {
        out[kRoleNames[i]] = slots_[i];
    }
    out["embedding"] = slots_[kEmbeddingSlot];
    return out;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(config) {
    if (!backend_) {
        throw ContractError("gateway requires a backend");
    }
    if (config_.retry.max_attempts < 1) {
        throw ConfigError("retry max_attempts must be at least 1");
    }
    if (config_.concurrency_cap < 1) {
        throw ConfigError("concurrency_cap must be at least 1");
    }
}

void Gateway::acquire_slot() {
    std::unique_lock<std::mutex> lock(slots_mutex_);
    slots_cv_.wait(lock, [this] { return in_flight_ < config_.concurrency_cap; });
    ++in_flight_;
}

void Gateway::release_slot() {
    {
        std::lock_guard<std::mutex> lock(slots_mutex_);
        --in_flight_;
    }
    slots_cv_.notify_one();
}

std::chrono::milliseconds Gateway::backoff_delay(int attempt) const {
    double delay = static_cast<double>(config_.retry.initial_delay.count());
    for (int i = 1; i < attempt; ++i) {
        delay *= config_.retry.multiplier;
    }
    double cap = static_cast<double>(config_.retry.max_delay.count());
    if (delay > cap) {
        delay = cap;
    }
    return std::chrono::milliseconds(static_cast<long long>(delay));
}

ChatResult Gateway::chat(const ChatRequest& request) {
    if (request.user_message.empty()) {
        throw ContractError("chat request has empty user message");
    }
    int attempts = 0;
    std::string last_error;
    while (attempts < config_.retry.max_attempts) {
        ++attempts;
        ledger_.record_attempt(request.role);
        try {
            acquire_slot();
            BackendReply reply;
            try {
                reply = backend_->chat(request);
            } catch (...) {
                release_slot();
                throw;
            }
            release_slot();

            TokenUsage usage;
            if (reply.usage) {
                usage = *reply.usage;
            } else {
                usage.input_tokens = estimate_tokens(request.system_message) +
                                     estimate_tokens(request.user_message);
                usage.output_tokens = estimate_tokens(reply.text);
            }
            ledger_.record_chat_usage(request.role, usage);
            return ChatResult{reply.text, usage, attempts};
        } catch (const TransportError& e) {
            last_error = e.what();
            if (attempts < config_.retry.max_attempts) {
                auto delay = backoff_delay(attempts);
                if (delay.count() > 0) {
                    std::this_thread::sleep_for(delay);
                }
            }
        }
    }
    throw TransportError("retries exhausted after " + std::to_string(attempts) +
                         " attempts for role " + to_string(request.role) +
                         ": " + last_error);
}

EmbeddingVector Gateway::embed(const std::string& text) {
    auto vectors = embed_batch({text});
    return std::move(vectors.front());
}

std::vector<EmbeddingVector> Gateway::embed_batch(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        return {};
    }
    int attempts = 0;
    std::string last_error;
    while (attempts < config_.retry.max_attempts) {
        ++attempts;
        ledger_.record_embedding(TokenUsage{}, 1);
        try {
            acquire_slot();
            std::vector<EmbedReply> replies;
            try {
                replies = backend_->embed(texts);
            } catch (...) {
                release_slot();
                throw;
            }
            release_slot();

            if (replies.size() != texts.size()) {
                throw BackendError(0, "",
                                   "embedding batch size mismatch: expected " +
                                       std::to_string(texts.size()) + ", got " +
                                       std::to_string(replies.size()));
            }
            std::vector<EmbeddingVector> out;
            out.reserve(replies.size());
            TokenUsage usage;
            for (std::size_t i = 0; i < replies.size(); ++i) {
                auto& reply = replies[i];
                if (config_.dimension > 0 &&
                    reply.values.size() != static_cast<std::size_t>(config_.dimension)) {
                    throw BackendError(
                        0, "",
                        "embedding dimension mismatch: expected " +
                            std::to_string(config_.dimension) + ", got " +
                            std::to_string(reply.values.size()));
                }
                if (reply.usage) {
                    usage.input_tokens += reply.usage->input_tokens;
                    usage.output_tokens += reply.usage->output_tokens;
                } else {
                    usage.input_tokens += estimate_tokens(texts[i]);
                }
                out.emplace_back(std::move(reply.values));
            }
            ledger_.record_embedding(usage, 0);
            return out;
        } catch (const TransportError& e) {
            last_error = e.what();
            if (attempts < config_.retry.max_attempts) {
                auto delay = backoff_delay(attempts);
                if (delay.count() > 0) {
                    std::this_thread::sleep_for(delay);
                }
            }
        }
    }
    throw TransportError("retries exhausted after " + std::to_string(attempts) +
                         " attempts for embedding batch: " + last_error);
}

} // namespace doctorrag
