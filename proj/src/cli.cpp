#include "doctorrag/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>

#include <json.hpp>

#include "doctorrag/context.hpp"
#include "doctorrag/http_backend.hpp"
#include "doctorrag/ingest.hpp"
#include "doctorrag/judge.hpp"
#include "doctorrag/mock_backend.hpp"
#include "doctorrag/retrieval.hpp"
#include "doctorrag/store.hpp"
#include "doctorrag/tasks.hpp"
#include "doctorrag/textgrad.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

namespace fs = std::filesystem;

void write_json_atomic(const std::string& path, const nlohmann::json& doc) {
    write_file_atomic(path, doc.dump(2) + "\n");
}

std::string error_line(ErrorCategory category, const std::string& message) {
    nlohmann::json doc{{"category", to_string(category)}, {"message", message}};
    return doc.dump();
}

// Content digest of a file, or of a store directory's three files in fixed
// name order.
std::string digest_path(const std::string& path) {
    if (fs::is_directory(path)) {
        std::uint64_t digest = fnv1a64("dir");
        for (const char* name :
             {"manifest.json", "entries.jsonl", "embeddings.f32"}) {
            fs::path file = fs::path(path) / name;
            digest = fnv1a64(name, digest);
            digest = fnv1a64("\x1f", digest);
            if (fs::is_regular_file(file)) {
                digest = fnv1a64(read_file(file.string()), digest);
            }
            digest = fnv1a64("\x1e", digest);
        }
        return hex64(digest);
    }
    return hex64(fnv1a64(read_file(path)));
}

struct Timing {
    std::chrono::steady_clock::time_point started =
        std::chrono::steady_clock::now();

    // The only artifact carrying wall-clock values; everything else stays
    // byte-identical across reruns.
    void write_sidecar(const std::string& out_dir,
                       const std::string& command) const {
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        auto unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch());
        nlohmann::json doc{{"command", command},
                           {"elapsed_ms", elapsed.count()},
                           {"unix_time_ms", unix_ms.count()}};
        write_json_atomic((fs::path(out_dir) / "timing.json").string(), doc);
    }
};

void write_run_manifest(const RunConfig& config, const std::string& command,
                        const std::map<std::string, std::string>& inputs) {
    nlohmann::json doc;
    doc["command"] = command;
    doc["config"] = nlohmann::json::parse(run_config_to_json(config));
    doc["config_digest"] = config_digest(config);
    doc["inputs"] = nlohmann::json(inputs);
    write_json_atomic((fs::path(config.out_dir) / "run_manifest.json").string(),
                      doc);
}

void write_usage(const RunConfig& config, const Gateway& gateway) {
    nlohmann::json slots;
    for (const auto& [name, counters] : gateway.ledger().snapshot()) {
        slots[name] = {{"input_tokens", counters.input_tokens},
                       {"output_tokens", counters.output_tokens},
                       {"requests", counters.requests}};
    }
    UsageCounters total = gateway.ledger().total();
    nlohmann::json doc{{"slots", slots},
                       {"total",
                        {{"input_tokens", total.input_tokens},
                         {"output_tokens", total.output_tokens},
                         {"requests", total.requests}}}};
    write_json_atomic((fs::path(config.out_dir) / "usage.json").string(), doc);
}

// Shared failure-to-exit-code rim around every command body.
int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        std::cerr << error_line(e.category(), e.what()) << "\n";
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        std::cerr << error_line(ErrorCategory::internal, e.what()) << "\n";
        return exit_code_for(ErrorCategory::internal);
    }
}

KnowledgeStore load_knowledge(const RunEnvironment& env) {
    if (env.config.knowledge_store.empty()) {
        throw ConfigError("knowledge_store path is not configured");
    }
    return KnowledgeStore::load(env.config.knowledge_store, env.vocabulary);
}

PatientStore load_patients(const RunEnvironment& env) {
    if (env.config.patient_store.empty()) {
        throw ConfigError("patient_store path is not configured");
    }
    return PatientStore::load(env.config.patient_store);
}

Pipeline make_pipeline(RunEnvironment& env, const KnowledgeStore& knowledge,
                       const PatientStore& patients) {
    Pipeline pipeline;
    pipeline.gateway = env.gateway.get();
    pipeline.templates = &env.templates;
    pipeline.vocabulary = &env.vocabulary;
    pipeline.knowledge = &knowledge;
    pipeline.patients = &patients;
    pipeline.retrieval.k = static_cast<std::size_t>(env.config.k);
    pipeline.retrieval.leakage_guard = env.config.leakage_guard;
    pipeline.retrieval.leakage_threshold = env.config.leakage_threshold;
    pipeline.multi_tag = env.config.multi_tag;
    return pipeline;
}

nlohmann::json hits_to_json(const RetrievalResult& result) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& hit : result.hits) {
        hits.push_back({{"id", hit.id}, {"score", hit.score}});
    }
    return hits;
}

nlohmann::json stats_to_json(const RetrievalStats& stats) {
    return {{"scanned", stats.scanned},
            {"concept_filtered", stats.concept_filtered},
            {"negative_excluded", stats.negative_excluded},
            {"leakage_excluded", stats.leakage_excluded},
            {"skipped", stats.skipped},
            {"warnings", stats.warnings}};
}

std::vector<TaskItem> read_query_file(const std::string& path) {
    std::vector<TaskItem> items;
    std::size_t line_number = 0;
    for (const auto& line : read_lines(path)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_number) +
                              ": invalid JSON (" + e.what() + ")");
        }
        if (!record.is_object() || !record.contains("query")) {
            throw FormatError(path + ":" + std::to_string(line_number) +
                              ": record needs 'query'");
        }
        TaskItem item;
        item.query = record.at("query").get<std::string>();
        if (record.contains("gold")) {
            item.gold = record.at("gold").get<std::string>();
        }
        if (record.contains("source_record_id")) {
            item.source_record_id =
                record.at("source_record_id").get<std::string>();
        }
        items.push_back(std::move(item));
    }
    if (items.empty()) {
        throw InputError("no queries in " + path);
    }
    return items;
}

// Runs one refinement: single-pass answer first, that answer refined for T
// iterations. Writes the trace and final answer under item_dir.
RefinementTrace refine_one(RunEnvironment& env, const Pipeline& pipeline,
                           const std::string& query_text,
                           const std::string& item_dir) {
    QueryRun run = answer_query(pipeline, query_text);

    RefinementEngine engine(*env.gateway, env.templates);
    RefinementConfig refinement;
    refinement.iterations = env.config.iterations;
    refinement.early_stopping = env.config.early_stopping;
    RefinementTrace trace =
        engine.run_refinement(query_text, run.context, run.answer, refinement);

    save_trace(trace, (fs::path(item_dir) / "trace").string());
    write_file_atomic((fs::path(item_dir) / "final_answer.txt").string(),
                      trace.final_answer + "\n");
    return trace;
}

nlohmann::json trace_summary(const RefinementTrace& trace) {
    nlohmann::json doc{{"run_id", trace.run_id},
                       {"query", trace.query},
                       {"iterations_configured", trace.iterations_configured},
                       {"iterations_run", trace.iterations.size()},
                       {"calls", trace.calls.size()},
                       {"early_stopped", trace.early_stopped},
                       {"final_answer", trace.final_answer},
                       {"digest", hex64(trace.digest())}};
    if (trace.failure) {
        doc["failure"] = {{"iteration", trace.failure->iteration},
                          {"role", to_string(trace.failure->role)},
                          {"message", trace.failure->message}};
    }
    return doc;
}

} // namespace

int exit_code_for(ErrorCategory category) {
    switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::input: return 3;
    case ErrorCategory::backend: return 4;
    case ErrorCategory::internal: return 5;
    }
    return 5;
}

RunEnvironment make_environment(const RunConfig& config) {
    validate_run_config(config);

    std::shared_ptr<Backend> backend;
    if (config.backend == "mock") {
        std::vector<MockRule> rules;
        if (!config.mock_script.empty()) {
            rules = load_mock_script(config.mock_script);
        }
        backend = std::make_shared<MockBackend>(config.dimension,
                                                std::move(rules),
                                                config.mock_seed);
    } else {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + config.api_key_env +
                              " is not set");
        }
        HttpBackendConfig http;
        http.base_url = config.base_url;
        http.api_key = key;
        http.models["default"] = config.model;
        http.models["embedding"] = config.embedding_model.empty()
                                       ? config.model
                                       : config.embedding_model;
        http.timeout_seconds = config.timeout_seconds;
        backend = std::make_shared<HttpBackend>(std::move(http));
    }

    GatewayConfig gateway_config;
    gateway_config.retry.max_attempts = config.max_attempts;
    gateway_config.concurrency_cap = config.concurrency;
    gateway_config.dimension = config.dimension;
    auto gateway = std::make_shared<Gateway>(backend, gateway_config);

    TemplateCatalog templates =
        config.templates_dir.empty()
            ? TemplateCatalog::builtin()
            : TemplateCatalog::load(config.templates_dir, config.language);

    return RunEnvironment{config, std::move(backend), std::move(gateway),
                          std::move(templates),
                          ConceptVocabulary::icd10_first_level()};
}

int cmd_ingest(const RunConfig& config, const std::string& kind,
               const std::string& input_path, const std::string& mapping_path) {
    return guarded([&]() -> int {
        Timing timing;
        if (kind != "knowledge" && kind != "patients") {
            throw ConfigError("ingest kind must be 'knowledge' or 'patients', "
                              "got '" + kind + "'");
        }
        if (config.dimension < 1) {
            throw ConfigError("ingest requires dimension >= 1");
        }
        RunEnvironment env = make_environment(config);
        Ingestor ingestor(*env.gateway, env.templates, env.vocabulary);
        IngestionConfig ingestion;
        ingestion.multi_tag = config.multi_tag;
        ingestion.concurrency = config.concurrency;

        IngestionReport report;
        std::string store_dir;
        if (kind == "knowledge") {
            KnowledgeMapping mapping;
            if (!mapping_path.empty()) {
                mapping = knowledge_mapping_from_file(mapping_path);
            }
            auto chunks = read_knowledge_file(input_path, mapping);
            auto [store, r] = ingestor.ingest_knowledge(chunks, ingestion);
            report = std::move(r);
            store_dir = (fs::path(config.out_dir) / "knowledge_store").string();
            store.save(store_dir);
        } else {
            PatientMapping mapping;
            if (!mapping_path.empty()) {
                mapping = patient_mapping_from_file(mapping_path);
            }
            auto rows = read_patient_file(input_path, mapping);
            auto [store, r] = ingestor.ingest_patients(rows, ingestion);
            report = std::move(r);
            store_dir = (fs::path(config.out_dir) / "patient_store").string();
            store.save(store_dir);
        }

        nlohmann::json items = nlohmann::json::array();
        for (const auto& item : report.items) {
            nlohmann::json row{{"id", item.id}, {"ok", item.ok}};
            if (!item.ok) {
                row["stage"] = item.stage;
                row["message"] = item.message;
            }
            items.push_back(row);
        }
        write_json_atomic(
            (fs::path(config.out_dir) / "ingest_report.json").string(),
            nlohmann::json{{"kind", kind},
                           {"succeeded", report.succeeded},
                           {"failed", report.failed},
                           {"store", store_dir},
                           {"items", items}});

        std::map<std::string, std::string> inputs{
            {"input", digest_path(input_path)}};
        if (!mapping_path.empty()) {
            inputs["mapping"] = digest_path(mapping_path);
        }
        write_run_manifest(config, "ingest", inputs);
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "ingest");
        return 0;
    });
}

int cmd_retrieve(const RunConfig& config, const std::string& query_text) {
    return guarded([&]() -> int {
        Timing timing;
        if (trim(query_text).empty()) {
            throw InputError("query text is empty");
        }
        RunEnvironment env = make_environment(config);
        KnowledgeStore knowledge = load_knowledge(env);
        PatientStore patients = load_patients(env);
        Pipeline pipeline = make_pipeline(env, knowledge, patients);

        TaggedQuery query = prepare_query(pipeline, query_text);
        RetrievalResult k_hits =
            retrieve_knowledge_topk(query, knowledge, pipeline.retrieval);
        RetrievalResult p_hits =
            retrieve_patients_topk(query, patients, pipeline.retrieval);
        AggregatedContext context =
            aggregate_context(k_hits.hits, p_hits.hits, knowledge, patients);

        write_json_atomic(
            (fs::path(config.out_dir) / "retrieval_report.json").string(),
            nlohmann::json{{"query", query_text},
                           {"tags", query.tags},
                           {"knowledge", hits_to_json(k_hits)},
                           {"knowledge_stats", stats_to_json(k_hits.stats)},
                           {"patients", hits_to_json(p_hits)},
                           {"patient_stats", stats_to_json(p_hits.stats)},
                           {"context", context.rendered},
                           {"context_empty", context.empty},
                           {"context_token_estimate", context.token_estimate}});

        write_run_manifest(config, "retrieve",
                           {{"knowledge_store",
                             digest_path(config.knowledge_store)},
                            {"patient_store",
                             digest_path(config.patient_store)}});
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "retrieve");
        return 0;
    });
}

int cmd_answer(const RunConfig& config, const std::string& query_text) {
    return guarded([&]() -> int {
        Timing timing;
        if (trim(query_text).empty()) {
            throw InputError("query text is empty");
        }
        RunEnvironment env = make_environment(config);
        KnowledgeStore knowledge = load_knowledge(env);
        PatientStore patients = load_patients(env);
        Pipeline pipeline = make_pipeline(env, knowledge, patients);

        QueryRun run = answer_query(pipeline, query_text);

        nlohmann::json knowledge_ids = nlohmann::json::array();
        for (const auto& hit : run.knowledge.hits) knowledge_ids.push_back(hit.id);
        nlohmann::json patient_ids = nlohmann::json::array();
        for (const auto& hit : run.patients.hits) patient_ids.push_back(hit.id);

        write_json_atomic(
            (fs::path(config.out_dir) / "answer.json").string(),
            nlohmann::json{{"query", query_text},
                           {"tags", run.query.tags},
                           {"answer", run.answer},
                           {"knowledge_ids", knowledge_ids},
                           {"patient_ids", patient_ids},
                           {"context_token_estimate",
                            run.context.token_estimate}});

        write_run_manifest(config, "answer",
                           {{"knowledge_store",
                             digest_path(config.knowledge_store)},
                            {"patient_store",
                             digest_path(config.patient_store)}});
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "answer");
        return 0;
    });
}

int cmd_refine(const RunConfig& config, const std::string& query_text,
               const std::string& task_path) {
    return guarded([&]() -> int {
        Timing timing;
        if (query_text.empty() == task_path.empty()) {
            throw ConfigError("refine needs exactly one of a query or a "
                              "task file");
        }
        RunEnvironment env = make_environment(config);
        KnowledgeStore knowledge = load_knowledge(env);
        PatientStore patients = load_patients(env);
        Pipeline pipeline = make_pipeline(env, knowledge, patients);

        std::map<std::string, std::string> inputs{
            {"knowledge_store", digest_path(config.knowledge_store)},
            {"patient_store", digest_path(config.patient_store)}};

        std::optional<FailureMarker> first_failure;
        nlohmann::json runs = nlohmann::json::array();
        if (!query_text.empty()) {
            RefinementTrace trace =
                refine_one(env, pipeline, query_text, config.out_dir);
            runs.push_back(trace_summary(trace));
            if (trace.failure) {
                first_failure = trace.failure;
            }
        } else {
            inputs["task"] = digest_path(task_path);
            std::vector<TaskItem> items = read_query_file(task_path);
            for (std::size_t i = 0; i < items.size(); ++i) {
                std::string item_dir =
                    (fs::path(config.out_dir) / ("item_" + std::to_string(i)))
                        .string();
                RefinementTrace trace =
                    refine_one(env, pipeline, items[i].query, item_dir);
                runs.push_back(trace_summary(trace));
                if (trace.failure && !first_failure) {
                    first_failure = trace.failure;
                }
            }
        }

        write_json_atomic(
            (fs::path(config.out_dir) / "refine_report.json").string(),
            nlohmann::json{{"iterations_configured", config.iterations},
                           {"runs", runs}});
        write_run_manifest(config, "refine", inputs);
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "refine");

        if (first_failure) {
            std::cerr << error_line(ErrorCategory::backend,
                                    "refinement failed at iteration " +
                                        std::to_string(first_failure->iteration) +
                                        " (" + to_string(first_failure->role) +
                                        "): " + first_failure->message)
                      << "\n";
            return exit_code_for(ErrorCategory::backend);
        }
        return 0;
    });
}

int cmd_eval(const RunConfig& config, const std::string& task_path,
             const std::string& kind, const std::string& labels_path) {
    return guarded([&]() -> int {
        Timing timing;
        TaskKind task_kind = task_kind_from_string(kind);
        LabeledTask task = load_task(task_path, task_kind, labels_path);

        RunEnvironment env = make_environment(config);
        KnowledgeStore knowledge = load_knowledge(env);
        PatientStore patients = load_patients(env);
        Pipeline pipeline = make_pipeline(env, knowledge, patients);

        nlohmann::json report;
        report["task_kind"] = to_string(task_kind);
        report["config_digest"] = config_digest(config);
        report["n_items"] = task.items.size();
        report["metrics_absent"] = absent_metrics();

        if (is_labeled_kind(task_kind)) {
            LabeledTaskResult result =
                run_labeled_task(task, pipeline, config.concurrency);
            report["metrics"] = {{"accuracy", result.accuracy},
                                 {"n_correct", result.n_correct}};
            nlohmann::json items = nlohmann::json::array();
            for (const auto& log : result.items) {
                items.push_back({{"index", log.index},
                                 {"query", log.query},
                                 {"gold", log.gold},
                                 {"prediction", log.raw_prediction},
                                 {"normalized_prediction",
                                  log.normalized_prediction},
                                 {"correct", log.correct},
                                 {"invalid_label", log.invalid_label},
                                 {"knowledge_ids", log.knowledge_ids},
                                 {"patient_ids", log.patient_ids}});
            }
            report["items"] = items;
        } else {
            TokenizerMode tokenizer = config.tokenizer == "chars"
                                          ? TokenizerMode::chars
                                          : TokenizerMode::words;
            GenerationTaskResult result = run_generation_task(
                task, pipeline, tokenizer, config.concurrency);
            report["tokenizer"] = to_string(result.tokenizer);
            report["metrics"] = {{"rouge_l_f1", result.rouge_l_f1},
                                 {"bleu_4", result.bleu_4},
                                 {"bleu_4_raw", result.bleu_4_raw}};
            nlohmann::json items = nlohmann::json::array();
            for (const auto& log : result.items) {
                items.push_back({{"index", log.index},
                                 {"query", log.query},
                                 {"reference", log.reference},
                                 {"answer", log.answer},
                                 {"rouge_l_f1", log.rouge.f1},
                                 {"rouge_l_precision", log.rouge.precision},
                                 {"rouge_l_recall", log.rouge.recall},
                                 {"bleu_4", log.bleu.value},
                                 {"bleu_4_raw", log.bleu.raw},
                                 {"knowledge_ids", log.knowledge_ids},
                                 {"patient_ids", log.patient_ids}});
            }
            report["items"] = items;
        }

        write_json_atomic((fs::path(config.out_dir) / "eval_report.json").string(),
                          report);

        std::map<std::string, std::string> inputs{
            {"task", digest_path(task_path)},
            {"knowledge_store", digest_path(config.knowledge_store)},
            {"patient_store", digest_path(config.patient_store)}};
        if (!labels_path.empty()) {
            inputs["labels"] = digest_path(labels_path);
        }
        write_run_manifest(config, "eval", inputs);
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "eval");
        return 0;
    });
}

int cmd_compare(const RunConfig& config,
                const std::vector<std::string>& variant_paths,
                const std::string& queries_path) {
    return guarded([&]() -> int {
        Timing timing;
        if (variant_paths.size() < 2) {
            throw ConfigError("compare needs at least two variant files");
        }
        std::vector<TaskItem> items = read_query_file(queries_path);
        std::vector<std::string> queries;
        for (const auto& item : items) {
            queries.push_back(item.query);
        }

        std::vector<AnswerVariant> variants;
        for (const auto& path : variant_paths) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_file(path));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path + ": invalid JSON (" +
                                  std::string(e.what()) + ")");
            }
            if (!doc.is_object() || !doc.contains("answers") ||
                !doc.at("answers").is_array()) {
                throw FormatError(path + ": expected {\"name\", \"answers\"}");
            }
            AnswerVariant variant;
            variant.name = doc.value("name", fs::path(path).stem().string());
            for (const auto& answer : doc.at("answers")) {
                variant.answers.push_back(answer.get<std::string>());
            }
            if (variant.answers.size() != queries.size()) {
                throw InputError(path + ": " +
                                 std::to_string(variant.answers.size()) +
                                 " answers for " +
                                 std::to_string(queries.size()) + " queries");
            }
            variants.push_back(std::move(variant));
        }

        RunEnvironment env = make_environment(config);
        JudgeConfig judge;
        judge.double_judging = config.double_judging;
        WinMatrix matrix = build_win_matrix(variants, queries, *env.gateway,
                                            env.templates, judge);
        write_file_atomic((fs::path(config.out_dir) / "win_matrix.json").string(),
                          matrix.to_json_string());

        std::map<std::string, std::string> inputs{
            {"queries", digest_path(queries_path)}};
        for (std::size_t i = 0; i < variant_paths.size(); ++i) {
            inputs["variant_" + std::to_string(i)] =
                digest_path(variant_paths[i]);
        }
        write_run_manifest(config, "compare", inputs);
        write_usage(config, *env.gateway);
        timing.write_sidecar(config.out_dir, "compare");
        return 0;
    });
}

} // namespace doctorrag
