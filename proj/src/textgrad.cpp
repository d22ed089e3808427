#include "doctorrag/textgrad.hpp"

#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

std::uint64_t mix_field(std::uint64_t digest, std::string_view field) {
    digest = fnv1a64(field, digest);
    return fnv1a64("\x1e", digest);
}

} // namespace

std::uint64_t RefinementTrace::digest() const {
    std::uint64_t d = fnv1a64("refinement-trace-v1");
    d = mix_field(d, run_id);
    d = mix_field(d, query);
    d = mix_field(d, std::to_string(iterations_configured));
    for (const auto& it : iterations) {
        d = mix_field(d, std::to_string(it.iteration));
        d = mix_field(d, it.prompt_text);
        d = mix_field(d, it.answer_text);
        d = mix_field(d, it.critiques.context_critique);
        d = mix_field(d, it.critiques.patient_critique);
        d = mix_field(d, it.gradients.answer_kc);
        d = mix_field(d, it.gradients.answer_pc);
        d = mix_field(d, it.gradients.prompt_kc);
        d = mix_field(d, it.gradients.prompt_pc);
        d = mix_field(d, it.complete ? "1" : "0");
    }
    for (const auto& call : calls) {
        d = mix_field(d, std::to_string(call.sequence));
        d = mix_field(d, std::to_string(call.iteration));
        d = mix_field(d, to_string(call.role));
        d = mix_field(d, call.request_digest);
        d = mix_field(d, call.response_text);
        d = mix_field(d, std::to_string(call.usage.input_tokens));
        d = mix_field(d, std::to_string(call.usage.output_tokens));
    }
    d = mix_field(d, final_answer);
    d = mix_field(d, early_stopped ? "1" : "0");
    if (failure) {
        d = mix_field(d, std::to_string(failure->iteration));
        d = mix_field(d, to_string(failure->role));
        d = mix_field(d, failure->message);
    }
    return d;
}

void save_trace(const RefinementTrace& trace, const std::string& dir) {
    namespace fs = std::filesystem;
    std::string calls;
    for (const auto& call : trace.calls) {
        nlohmann::json line{
            {"iteration", call.iteration},
            {"request_digest", call.request_digest},
            {"response", call.response_text},
            {"role", to_string(call.role)},
            {"run_id", trace.run_id},
            {"sequence", call.sequence},
            {"usage",
             {{"input_tokens", call.usage.input_tokens},
              {"output_tokens", call.usage.output_tokens}}},
        };
        calls += line.dump();
        calls += '\n';
    }

    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : trace.iterations) {
        iterations.push_back({
            {"answer", it.answer_text},
            {"complete", it.complete},
            {"context_critique", it.critiques.context_critique},
            {"grad_answer_kc", it.gradients.answer_kc},
            {"grad_answer_pc", it.gradients.answer_pc},
            {"grad_prompt_kc", it.gradients.prompt_kc},
            {"grad_prompt_pc", it.gradients.prompt_pc},
            {"iteration", it.iteration},
            {"patient_critique", it.critiques.patient_critique},
            {"prompt", it.prompt_text},
        });
    }
    nlohmann::json manifest{
        {"digest", hex64(trace.digest())},
        {"early_stopped", trace.early_stopped},
        {"final_answer", trace.final_answer},
        {"iterations", iterations},
        {"iterations_configured", trace.iterations_configured},
        {"query", trace.query},
        {"run_id", trace.run_id},
    };
    if (trace.failure) {
        manifest["failure"] = {
            {"iteration", trace.failure->iteration},
            {"message", trace.failure->message},
            {"role", to_string(trace.failure->role)},
        };
    }

    std::error_code ec;
    fs::create_directories(dir, ec);
    write_file_atomic((fs::path(dir) / "trace.jsonl").string(), calls);
    write_file_atomic((fs::path(dir) / "trace_manifest.json").string(),
                      manifest.dump(2) + "\n");
}

RefinementTrace load_trace(const std::string& dir) {
    namespace fs = std::filesystem;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(
            read_file((fs::path(dir) / "trace_manifest.json").string()));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("trace manifest in " + dir + ": " + e.what());
    }

    RefinementTrace trace;
    trace.run_id = manifest.value("run_id", std::string());
    trace.query = manifest.value("query", std::string());
    trace.iterations_configured = manifest.value("iterations_configured", 0);
    trace.final_answer = manifest.value("final_answer", std::string());
    trace.early_stopped = manifest.value("early_stopped", false);
    if (manifest.contains("failure")) {
        FailureMarker marker;
        marker.iteration = manifest["failure"].value("iteration", 0);
        auto role = role_from_string(
            manifest["failure"].value("role", std::string()));
        if (!role) {
            throw FormatError("trace manifest in " + dir +
                              " has unknown failure role");
        }
        marker.role = *role;
        marker.message = manifest["failure"].value("message", std::string());
        trace.failure = marker;
    }
    for (const auto& it : manifest.value("iterations", nlohmann::json::array())) {
        IterationRecord record;
        record.iteration = it.value("iteration", 0);
        record.prompt_text = it.value("prompt", std::string());
        record.answer_text = it.value("answer", std::string());
        record.critiques.context_critique =
            it.value("context_critique", std::string());
        record.critiques.patient_critique =
            it.value("patient_critique", std::string());
        record.gradients.answer_kc = it.value("grad_answer_kc", std::string());
        record.gradients.answer_pc = it.value("grad_answer_pc", std::string());
        record.gradients.prompt_kc = it.value("grad_prompt_kc", std::string());
        record.gradients.prompt_pc = it.value("grad_prompt_pc", std::string());
        record.complete = it.value("complete", true);
        trace.iterations.push_back(std::move(record));
    }

    for (const auto& line :
         read_lines((fs::path(dir) / "trace.jsonl").string())) {
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("trace line in " + dir + ": " + e.what());
        }
        CallRecord call;
        call.sequence = doc.value("sequence", 0);
        call.iteration = doc.value("iteration", 0);
        auto role = role_from_string(doc.value("role", std::string()));
        if (!role) {
            throw FormatError("trace line in " + dir + " has unknown role");
        }
        call.role = *role;
        call.request_digest = doc.value("request_digest", std::string());
        call.response_text = doc.value("response", std::string());
        if (doc.contains("usage")) {
            call.usage.input_tokens = doc["usage"].value("input_tokens", 0ULL);
            call.usage.output_tokens = doc["usage"].value("output_tokens", 0ULL);
        }
        trace.calls.push_back(std::move(call));
    }

    std::string stored = manifest.value("digest", std::string());
    if (stored != hex64(trace.digest())) {
        throw FormatError("trace in " + dir +
                          " fails its digest check; files were modified or "
                          "truncated");
    }
    return trace;
}

RefinementEngine::RefinementEngine(Gateway& gateway,
                                   const TemplateCatalog& templates)
    : gateway_(gateway), templates_(templates) {}

std::string RefinementEngine::chat_traced(RoleTag role,
                                          const std::string& system_key,
                                          std::string user_message,
                                          int iteration,
                                          RefinementTrace* trace) const {
    ChatRequest request;
    request.role = role;
    request.system_message = templates_.text(system_key);
    request.user_message = std::move(user_message);
    auto result = gateway_.chat(request);
    if (trace != nullptr) {
        CallRecord call;
        call.sequence = static_cast<int>(trace->calls.size());
        call.iteration = iteration;
        call.role = role;
        std::uint64_t digest = fnv1a64(request.system_message);
        digest = fnv1a64("\x1f", digest);
        digest = fnv1a64(request.user_message, digest);
        call.request_digest = hex64(digest);
        call.response_text = result.text;
        call.usage = result.usage;
        trace->calls.push_back(std::move(call));
    }
    return result.text;
}

PromptState RefinementEngine::build_initial_prompt(
    const std::string& query, const AggregatedContext& context,
    const std::string& initial_answer) const {
    if (context.empty) {
        std::cerr << "warning: building refinement prompt over an empty "
                     "retrieval context\n";
    }
    PromptState prompt;
    prompt.iteration = 0;
    prompt.text = templates_.render("initial_prompt",
                                    {{"query", query},
                                     {"context", context.rendered},
                                     {"answer", initial_answer}});
    return prompt;
}

AnswerState RefinementEngine::generate_answer(const PromptState& prompt,
                                              RefinementTrace* trace) const {
    std::string text = chat_traced(RoleTag::generator, "system_generation",
                                   prompt.text, prompt.iteration, trace);
    if (trim(text).empty()) {
        throw ModelOutputError("generation", "generator returned only whitespace");
    }
    return AnswerState{prompt.iteration, std::move(text)};
}

std::string RefinementEngine::critique_context(const AnswerState& answer,
                                               const AggregatedContext& context,
                                               RefinementTrace* trace) const {
    auto user = templates_.render("context_criterion",
                                  {{"context", context.rendered},
                                   {"answer", answer.text}});
    return chat_traced(RoleTag::context_criterion, "system_default",
                       std::move(user), answer.iteration, trace);
}

std::string RefinementEngine::critique_patient(const AnswerState& answer,
                                               const std::string& query,
                                               RefinementTrace* trace) const {
    auto user = templates_.render(
        "patient_criterion", {{"query", query}, {"answer", answer.text}});
    return chat_traced(RoleTag::patient_criterion, "system_default",
                       std::move(user), answer.iteration, trace);
}

std::string RefinementEngine::grad_answer_kc(const AnswerState& answer,
                                             const AggregatedContext& context,
                                             const std::string& critique,
                                             RefinementTrace* trace) const {
    auto user = templates_.render("grad_answer_kc",
                                  {{"answer", answer.text},
                                   {"context", context.rendered},
                                   {"critique", critique}});
    return chat_traced(RoleTag::grad_answer_kc, "system_default",
                       std::move(user), answer.iteration, trace);
}

std::string RefinementEngine::grad_answer_pc(const AnswerState& answer,
                                             const std::string& query,
                                             const std::string& critique,
                                             RefinementTrace* trace) const {
    auto user = templates_.render("grad_answer_pc",
                                  {{"answer", answer.text},
                                   {"query", query},
                                   {"critique", critique}});
    return chat_traced(RoleTag::grad_answer_pc, "system_default",
                       std::move(user), answer.iteration, trace);
}

std::string RefinementEngine::grad_prompt_kc(const PromptState& prompt,
                                             const AnswerState& answer,
                                             const std::string& answer_grad,
                                             RefinementTrace* trace) const {
    auto user = templates_.render("grad_prompt_kc",
                                  {{"prompt", prompt.text},
                                   {"answer", answer.text},
                                   {"answer_grad", answer_grad}});
    return chat_traced(RoleTag::grad_prompt_kc, "system_generation",
                       std::move(user), prompt.iteration, trace);
}

std::string RefinementEngine::grad_prompt_pc(const PromptState& prompt,
                                             const AnswerState& answer,
                                             const std::string& answer_grad,
                                             RefinementTrace* trace) const {
    auto user = templates_.render("grad_prompt_pc",
                                  {{"prompt", prompt.text},
                                   {"answer", answer.text},
                                   {"answer_grad", answer_grad}});
    return chat_traced(RoleTag::grad_prompt_pc, "system_generation",
                       std::move(user), prompt.iteration, trace);
}

PromptState RefinementEngine::tgd_step(const PromptState& prompt,
                                       const AnswerState& answer,
                                       const std::string& prompt_grad_kc,
                                       const std::string& prompt_grad_pc,
                                       const std::string& query,
                                       const std::string& example_answer,
                                       const RefinementConfig& config,
                                       RefinementTrace* trace) const {
    if (prompt.iteration >= config.iterations - 1) {
        throw ContractError("prompt update requested at iteration " +
                            std::to_string(prompt.iteration) +
                            " of a run with " +
                            std::to_string(config.iterations) + " iterations");
    }
    auto user = templates_.render("tgd",
                                  {{"prompt", prompt.text},
                                   {"answer", answer.text},
                                   {"prompt_grad_kc", prompt_grad_kc},
                                   {"prompt_grad_pc", prompt_grad_pc},
                                   {"query", query},
                                   {"example_answer", example_answer}});
    std::string text = chat_traced(RoleTag::tgd, "system_generation",
                                   std::move(user), prompt.iteration, trace);
    return PromptState{prompt.iteration + 1, std::move(text)};
}

RefinementTrace RefinementEngine::run_refinement(
    const std::string& query, const AggregatedContext& context,
    const std::string& initial_answer, const RefinementConfig& config) const {
    if (config.iterations < 1) {
        throw ContractError("refinement requires at least one iteration");
    }

    RefinementTrace trace;
    trace.query = query;
    trace.iterations_configured = config.iterations;
    {
        std::uint64_t seed = fnv1a64("refinement-run");
        seed = mix_field(seed, query);
        seed = mix_field(seed, context.rendered);
        seed = mix_field(seed, initial_answer);
        seed = mix_field(seed, std::to_string(config.iterations));
        trace.run_id = hex64(seed);
    }

    PromptState prompt = build_initial_prompt(query, context, initial_answer);
    std::string previous_context_critique;
    std::string previous_patient_critique;

    for (int t = 0; t < config.iterations; ++t) {
        IterationRecord record;
        record.iteration = t;
        record.prompt_text = prompt.text;

        RoleTag stage = RoleTag::generator;
        try {
            AnswerState answer = generate_answer(prompt, &trace);
            record.answer_text = answer.text;
            trace.final_answer = answer.text;

            stage = RoleTag::context_criterion;
            record.critiques.context_critique =
                critique_context(answer, context, &trace);
            stage = RoleTag::patient_criterion;
            record.critiques.patient_critique =
                critique_patient(answer, query, &trace);

            if (config.early_stopping && t > 0 &&
                record.critiques.context_critique == previous_context_critique &&
                record.critiques.patient_critique == previous_patient_critique) {
                record.complete = false;
                trace.iterations.push_back(std::move(record));
                trace.early_stopped = true;
                return trace;
            }
            previous_context_critique = record.critiques.context_critique;
            previous_patient_critique = record.critiques.patient_critique;

            stage = RoleTag::grad_answer_kc;
            record.gradients.answer_kc = grad_answer_kc(
                answer, context, record.critiques.context_critique, &trace);
            stage = RoleTag::grad_answer_pc;
            record.gradients.answer_pc = grad_answer_pc(
                answer, query, record.critiques.patient_critique, &trace);
            stage = RoleTag::grad_prompt_kc;
            record.gradients.prompt_kc = grad_prompt_kc(
                prompt, answer, record.gradients.answer_kc, &trace);
            stage = RoleTag::grad_prompt_pc;
            record.gradients.prompt_pc = grad_prompt_pc(
                prompt, answer, record.gradients.answer_pc, &trace);

            trace.iterations.push_back(record);

            if (t < config.iterations - 1) {
                stage = RoleTag::tgd;
                prompt = tgd_step(prompt, answer, record.gradients.prompt_kc,
                                  record.gradients.prompt_pc, query,
                                  initial_answer, config, &trace);
            }
        } catch (const Error& e) {
            // A failure in the between-iteration update happens after the
            // iteration record was already committed; don't record it twice.
            if (trace.iterations.empty() ||
                trace.iterations.back().iteration != t) {
                record.complete = false;
                trace.iterations.push_back(std::move(record));
            }
            trace.failure = FailureMarker{t, stage, e.what()};
            return trace;
        }
    }
    return trace;
}

} // namespace doctorrag
