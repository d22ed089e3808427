#include "doctorrag/mock_backend.hpp"

#include <json.hpp>

#include "doctorrag/util.hpp"

namespace doctorrag {

MockBackend::MockBackend(int dimension, std::vector<MockRule> rules,
                         std::uint64_t seed)
    : dimension_(dimension), seed_(seed), rules_(std::move(rules)),
      fails_served_(rules_.size(), 0) {
    if (dimension_ < 1) {
        throw ConfigError("mock backend dimension must be positive");
    }
}

void MockBackend::add_rule(MockRule rule) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back(std::move(rule));
    fails_served_.push_back(0);
}

std::string MockBackend::fallback_response(const ChatRequest& request,
                                           std::uint64_t seed) {
    std::uint64_t digest = fnv1a64(request.system_message);
    digest = fnv1a64("\x1f", digest);
    digest = fnv1a64(request.user_message, digest);
    digest ^= splitmix64(seed);
    return std::string("mock:") + to_string(request.role) + ":" + hex64(digest);
}

std::vector<float> MockBackend::scripted_embedding(const std::string& text,
                                                   int dimension,
                                                   std::uint64_t seed) {
    std::uint64_t base = fnv1a64(text) ^ splitmix64(seed);
    std::vector<float> values(static_cast<std::size_t>(dimension));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t word = splitmix64(base + i);
        double unit = static_cast<double>(word >> 40) /
                      static_cast<double>(1ULL << 24);
        values[i] = static_cast<float>(unit * 2.0 - 1.0);
    }
    bool all_zero = true;
    for (float v : values) {
        if (v != 0.0f) {
            all_zero = false;
            break;
        }
    }
    if (all_zero) {
        values[0] = 1.0f;
    }
    return values;
}

BackendReply MockBackend::chat(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    calls_.push_back({request.role, request.system_message, request.user_message});
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const MockRule& rule = rules_[i];
        if (rule.role != request.role) {
            continue;
        }
        if (!rule.match.empty() &&
            request.user_message.find(rule.match) == std::string::npos) {
            continue;
        }
        if (fails_served_[i] < rule.fail_first) {
            ++fails_served_[i];
            throw TransportError("scripted failure " +
                                 std::to_string(fails_served_[i]) + "/" +
                                 std::to_string(rule.fail_first));
        }
        return BackendReply{rule.response, std::nullopt};
    }
    return BackendReply{fallback_response(request, seed_), std::nullopt};
}

std::vector<EmbedReply> MockBackend::embed(const std::vector<std::string>& texts) {
    std::vector<EmbedReply> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        out.push_back({scripted_embedding(text, dimension_, seed_), std::nullopt});
    }
    return out;
}

std::vector<MockCall> MockBackend::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

std::vector<RoleTag> MockBackend::role_sequence() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<RoleTag> roles;
    roles.reserve(calls_.size());
    for (const auto& call : calls_) {
        roles.push_back(call.role);
    }
    return roles;
}

void MockBackend::clear_calls() {
    std::lock_guard<std::mutex> lock(mutex_);
    calls_.clear();
}

std::vector<MockRule> load_mock_script(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("mock script " + path + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw InputError("mock script " + path + ": expected a JSON array");
    }
    std::vector<MockRule> rules;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        if (!item.is_object() || !item.contains("role") || !item.contains("response")) {
            throw InputError("mock script " + path + ": rule " + std::to_string(i) +
                             " must be an object with role and response");
        }
        auto role = role_from_string(item["role"].get<std::string>());
        if (!role) {
            throw InputError("mock script " + path + ": rule " + std::to_string(i) +
                             " has unknown role " + item["role"].get<std::string>());
        }
        MockRule rule;
        rule.role = *role;
        rule.response = item["response"].get<std::string>();
        rule.match = item.value("match", std::string());
        rule.fail_first = item.value("fail_first", 0);
        rules.push_back(std::move(rule));
    }
    return rules;
}

} // namespace doctorrag
