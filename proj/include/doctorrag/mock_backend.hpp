#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "doctorrag/gateway.hpp"

namespace doctorrag {

// One scripted reply. A rule matches when the request role equals `role` and
// the user message contains `match` (empty matches everything). `fail_first`
// makes the first n matching attempts raise a transport failure before the
// response is served.
struct MockRule {
    RoleTag role = RoleTag::generator;
    std::string match;
    std::string response;
    int fail_first = 0;
};

struct MockCall {
    RoleTag role;
    std::string system_message;
    std::string user_message;
};

// Fully deterministic offline backend. Chat replies come from the first
// matching rule; with no match the reply is derived from a stable hash of the
// request, so identical runs produce identical transcripts. Embeddings are
// derived from a stable hash of the text. The seed shifts every derived value
// while staying deterministic, so distinct seeds give distinct fixtures.
// Every chat attempt is appended to a call log that tests use as an
// independent oracle.
class MockBackend : public Backend {
public:
    explicit MockBackend(int dimension = 16, std::vector<MockRule> rules = {},
                         std::uint64_t seed = 0);

    void add_rule(MockRule rule);

    BackendReply chat(const ChatRequest& request) override;
    std::vector<EmbedReply> embed(const std::vector<std::string>& texts) override;

    std::vector<MockCall> calls() const;
    std::vector<RoleTag> role_sequence() const;
    void clear_calls();

    int dimension() const noexcept { return dimension_; }

    // Hash-derived reply used when no rule matches.
    static std::string fallback_response(const ChatRequest& request,
                                         std::uint64_t seed = 0);
    // Hash-derived embedding; components lie in [-1, 1) and the vector is
    // never zero-norm.
    static std::vector<float> scripted_embedding(const std::string& text,
                                                 int dimension,
                                                 std::uint64_t seed = 0);

private:
    int dimension_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    std::vector<MockRule> rules_;
    std::vector<int> fails_served_;
    std::vector<MockCall> calls_;
};

// Loads rules from a JSON file: an array of objects with keys
// role, match, response, fail_first (match and fail_first optional).
std::vector<MockRule> load_mock_script(const std::string& path);

} // namespace doctorrag
