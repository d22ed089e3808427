#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "doctorrag/context.hpp"
#include "doctorrag/gateway.hpp"
#include "doctorrag/templates.hpp"

namespace doctorrag {

// The refinement prompt for iteration t. At t=0 the text embeds the query,
// the rendered context, and the answer under refinement; for t>0 it is the
// update agent's output, verbatim.
struct PromptState {
    int iteration = 0;
    std::string text;
};

struct AnswerState {
    int iteration = 0;
    std::string text;
};

struct CritiquePair {
    std::string context_critique;
    std::string patient_critique;
};

struct GradientBundle {
    std::string answer_kc;
    std::string answer_pc;
    std::string prompt_kc;
    std::string prompt_pc;
};

struct RefinementConfig {
    int iterations = 3; // T
    // When enabled, a run stops once both critiques repeat the previous
    // iteration verbatim.
    bool early_stopping = false;
};

struct CallRecord {
    int sequence = 0;
    int iteration = 0;
    RoleTag role = RoleTag::generator;
    std::string request_digest;
    std::string response_text;
    TokenUsage usage;
};

struct IterationRecord {
    int iteration = 0;
    std::string prompt_text;
    std::string answer_text;
    CritiquePair critiques;
    GradientBundle gradients;
    // False when the run stopped before this iteration's gradients.
    bool complete = true;
};

struct FailureMarker {
    int iteration = 0;
    RoleTag role = RoleTag::generator;
    std::string message;
};

// Complete account of one refinement run: every state and every model call.
// Serializes losslessly; the digest covers all content fields.
struct RefinementTrace {
    std::string run_id;
    std::string query;
    int iterations_configured = 0;
    std::vector<IterationRecord> iterations;
    std::vector<CallRecord> calls;
    std::string final_answer;
    bool early_stopped = false;
    std::optional<FailureMarker> failure;

    std::uint64_t digest() const;
};

// Writes trace.jsonl (one line per call) and trace_manifest.json (states,
// outcome, digest) into the directory; load_trace verifies the digest.
void save_trace(const RefinementTrace& trace, const std::string& dir);
RefinementTrace load_trace(const std::string& dir);

// One iteration runs seven agent calls in a fixed order: generator, the two
// criterion agents, two answer-level gradients, two prompt-level gradients.
// Between iterations a single update call produces the next prompt, so a run
// of T iterations makes exactly 7T + (T - 1) calls, and the final answer is
// the T-th generator output.
class RefinementEngine {
public:
    RefinementEngine(Gateway& gateway, const TemplateCatalog& templates);

    // The initial prompt embeds query, rendered context, and the answer to
    // refine. An empty context renders with its empty-section markers and a
    // warning on stderr.
    PromptState build_initial_prompt(const std::string& query,
                                     const AggregatedContext& context,
                                     const std::string& initial_answer) const;

    AnswerState generate_answer(const PromptState& prompt,
                                RefinementTrace* trace = nullptr) const;

    std::string critique_context(const AnswerState& answer,
                                 const AggregatedContext& context,
                                 RefinementTrace* trace = nullptr) const;
    std::string critique_patient(const AnswerState& answer,
                                 const std::string& query,
                                 RefinementTrace* trace = nullptr) const;

    std::string grad_answer_kc(const AnswerState& answer,
                               const AggregatedContext& context,
                               const std::string& critique,
                               RefinementTrace* trace = nullptr) const;
    std::string grad_answer_pc(const AnswerState& answer,
                               const std::string& query,
                               const std::string& critique,
                               RefinementTrace* trace = nullptr) const;
    std::string grad_prompt_kc(const PromptState& prompt,
                               const AnswerState& answer,
                               const std::string& answer_grad,
                               RefinementTrace* trace = nullptr) const;
    std::string grad_prompt_pc(const PromptState& prompt,
                               const AnswerState& answer,
                               const std::string& answer_grad,
                               RefinementTrace* trace = nullptr) const;

    // Produces the prompt for iteration t+1 from both prompt-level gradients.
    // example_answer is the answer the initial prompt was built around.
    // Calling this on the final iteration (t == T-1) is a contract violation.
    PromptState tgd_step(const PromptState& prompt, const AnswerState& answer,
                         const std::string& prompt_grad_kc,
                         const std::string& prompt_grad_pc,
                         const std::string& query,
                         const std::string& example_answer,
                         const RefinementConfig& config,
                         RefinementTrace* trace = nullptr) const;

    // Runs the full loop. A stage failure aborts the run and returns the
    // partial trace with its failure marker set instead of throwing.
    RefinementTrace run_refinement(const std::string& query,
                                   const AggregatedContext& context,
                                   const std::string& initial_answer,
                                   const RefinementConfig& config) const;

private:
    Gateway& gateway_;
    const TemplateCatalog& templates_;

    std::string chat_traced(RoleTag role, const std::string& system_key,
                            std::string user_message, int iteration,
                            RefinementTrace* trace) const;
};

} // namespace doctorrag
