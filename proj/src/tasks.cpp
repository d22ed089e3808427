#include "doctorrag/tasks.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/ingest.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += "\"";
    return out;
}

std::string format_float(float value) {
    char buffer[48];
    std::snprintf(buffer, sizeof(buffer), "%.9g", static_cast<double>(value));
    return buffer;
}

std::vector<std::string> hit_ids(const RetrievalResult& result) {
    std::vector<std::string> ids;
    ids.reserve(result.hits.size());
    for (const auto& hit : result.hits) {
        ids.push_back(hit.id);
    }
    return ids;
}

// Runs fn over all items on the worker pool; the first failure (by item
// index) is rethrown after every worker has finished.
void run_items(std::size_t count, int concurrency,
               const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> failures(count);
    for_each_index(count, concurrency, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    });
    for (const auto& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }
}

void write_embedding_csv(const std::string& out_path,
                         const std::vector<std::tuple<std::string, std::string,
                                                      const EmbeddingVector*>>& rows,
                         std::size_t dimension) {
    std::ostringstream out;
    out << "id,label";
    for (std::size_t d = 0; d < dimension; ++d) {
        out << ",e" << d;
    }
    out << "\n";
    for (const auto& [id, label, embedding] : rows) {
        out << csv_escape(id) << "," << csv_escape(label);
        for (float value : embedding->values()) {
            out << "," << format_float(value);
        }
        out << "\n";
    }
    write_file_atomic(out_path, out.str());
}

} // namespace

const char* to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::disease_diagnosis: return "disease_diagnosis";
    case TaskKind::question_answering: return "question_answering";
    case TaskKind::treatment_recommendation: return "treatment_recommendation";
    case TaskKind::text_generation: return "text_generation";
    }
    return "disease_diagnosis";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "disease_diagnosis") return TaskKind::disease_diagnosis;
    if (name == "question_answering") return TaskKind::question_answering;
    if (name == "treatment_recommendation")
        return TaskKind::treatment_recommendation;
    if (name == "text_generation") return TaskKind::text_generation;
    throw InputError("unknown task kind: " + name);
}

bool is_labeled_kind(TaskKind kind) {
    return kind != TaskKind::text_generation;
}

LabeledTask load_task(const std::string& items_path, TaskKind kind,
                      const std::string& labels_path) {
    LabeledTask task;
    task.kind = kind;

    if (is_labeled_kind(kind)) {
        if (labels_path.empty()) {
            throw InputError("task kind " + std::string(to_string(kind)) +
                             " requires a label vocabulary file");
        }
        for (const auto& line : read_lines(labels_path)) {
            std::string label = trim(line);
            if (!label.empty()) {
                task.valid_labels.push_back(label);
            }
        }
        if (task.valid_labels.empty()) {
            throw InputError("label vocabulary is empty: " + labels_path);
        }
    }

    std::set<std::string> label_set;
    for (const auto& label : task.valid_labels) {
        label_set.insert(normalize_label(label));
    }

    std::size_t line_number = 0;
    for (const auto& line : read_lines(items_path)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(items_path + ":" + std::to_string(line_number) +
                              ": invalid JSON (" + e.what() + ")");
        }
        if (!record.is_object() || !record.contains("query") ||
            !record.contains("gold")) {
            throw FormatError(items_path + ":" + std::to_string(line_number) +
                              ": record needs 'query' and 'gold'");
        }
        TaskItem item;
        item.query = record.at("query").get<std::string>();
        item.gold = record.at("gold").get<std::string>();
        if (record.contains("source_record_id")) {
            item.source_record_id =
                record.at("source_record_id").get<std::string>();
        }
        if (is_labeled_kind(kind) &&
            label_set.count(normalize_label(item.gold)) == 0) {
            throw InputError(items_path + ":" + std::to_string(line_number) +
                             ": gold label '" + item.gold +
                             "' is not in the label vocabulary");
        }
        task.items.push_back(std::move(item));
    }
    if (task.items.empty()) {
        throw InputError("task file has no items: " + items_path);
    }
    return task;
}

TaggedQuery prepare_query(const Pipeline& pipeline, const std::string& query_text,
                          const std::string& query_id) {
    if (pipeline.gateway == nullptr || pipeline.templates == nullptr ||
        pipeline.vocabulary == nullptr) {
        throw ContractError("pipeline is missing gateway, templates, or "
                            "vocabulary");
    }
    Ingestor ingestor(*pipeline.gateway, *pipeline.templates,
                      *pipeline.vocabulary);
    TaggedQuery query;
    query.id = query_id;
    query.text = query_text;
    query.tags = ingestor.tag_concepts(query_text, pipeline.multi_tag);
    query.embedding = ingestor.embed_text(query_text);
    return query;
}

QueryRun answer_query(const Pipeline& pipeline, const std::string& query_text,
                      const std::vector<std::string>& options) {
    if (pipeline.knowledge == nullptr || pipeline.patients == nullptr) {
        throw ContractError("pipeline is missing a store");
    }
    QueryRun run;
    run.query = prepare_query(pipeline, query_text);
    run.knowledge = retrieve_knowledge_topk(run.query, *pipeline.knowledge,
                                            pipeline.retrieval);
    run.patients = retrieve_patients_topk(run.query, *pipeline.patients,
                                          pipeline.retrieval);
    run.context = aggregate_context(run.knowledge.hits, run.patients.hits,
                                    *pipeline.knowledge, *pipeline.patients);

    ChatRequest request;
    request.role = RoleTag::generator;
    if (options.empty()) {
        request.system_message = pipeline.templates->text("system_generation");
        request.user_message = pipeline.templates->render(
            "answer", {{"query", query_text}, {"context", run.context.rendered}});
    } else {
        std::string joined;
        for (const auto& option : options) {
            if (!joined.empty()) {
                joined += "\n";
            }
            joined += option;
        }
        request.system_message = pipeline.templates->text("system_labeled");
        request.user_message = pipeline.templates->render(
            "answer_labeled", {{"query", query_text},
                               {"context", run.context.rendered},
                               {"options", joined}});
    }
    ChatResult result = pipeline.gateway->chat(request);
    run.answer = result.text;
    return run;
}

LabeledTaskResult run_labeled_task(const LabeledTask& task,
                                   const Pipeline& pipeline, int concurrency) {
    if (!is_labeled_kind(task.kind)) {
        throw ContractError("text_generation tasks are not label-scored");
    }
    if (task.items.empty()) {
        throw InputError("task has no items");
    }

    std::set<std::string> label_set;
    for (const auto& label : task.valid_labels) {
        label_set.insert(normalize_label(label));
    }

    LabeledTaskResult result;
    result.n_items = task.items.size();
    result.items.resize(task.items.size());

    run_items(task.items.size(), concurrency, [&](std::size_t i) {
        const TaskItem& item = task.items[i];

        // Held-out evaluation must not retrieve the item's own record.
        Pipeline scoped = pipeline;
        scoped.retrieval.leakage_guard = true;
        if (!item.source_record_id.empty()) {
            scoped.retrieval.exclude_ids.push_back(item.source_record_id);
        }

        QueryRun run = answer_query(scoped, item.query, task.valid_labels);

        LabeledItemLog& log = result.items[i];
        log.index = i;
        log.query = item.query;
        log.gold = item.gold;
        log.raw_prediction = run.answer;
        log.normalized_prediction = normalize_label(run.answer);
        log.correct = log.normalized_prediction == normalize_label(item.gold);
        log.invalid_label = label_set.count(log.normalized_prediction) == 0;
        log.knowledge_ids = hit_ids(run.knowledge);
        log.patient_ids = hit_ids(run.patients);
    });

    for (const auto& log : result.items) {
        if (log.correct) {
            ++result.n_correct;
        }
    }
    result.accuracy = static_cast<double>(result.n_correct) /
                      static_cast<double>(result.n_items);
    return result;
}

const std::vector<std::string>& absent_metrics() {
    static const std::vector<std::string> metrics = {"BERTScore", "METEOR"};
    return metrics;
}

GenerationTaskResult run_generation_task(const LabeledTask& task,
                                         const Pipeline& pipeline,
                                         TokenizerMode tokenizer,
                                         int concurrency) {
    if (task.kind != TaskKind::text_generation) {
        throw ContractError("labeled tasks are not overlap-scored");
    }
    if (task.items.empty()) {
        throw InputError("task has no items");
    }

    GenerationTaskResult result;
    result.tokenizer = tokenizer;
    result.items.resize(task.items.size());

    run_items(task.items.size(), concurrency, [&](std::size_t i) {
        const TaskItem& item = task.items[i];

        Pipeline scoped = pipeline;
        scoped.retrieval.leakage_guard = true;
        if (!item.source_record_id.empty()) {
            scoped.retrieval.exclude_ids.push_back(item.source_record_id);
        }

        QueryRun run = answer_query(scoped, item.query);

        GenerationItemLog& log = result.items[i];
        log.index = i;
        log.query = item.query;
        log.reference = item.gold;
        log.answer = run.answer;
        std::vector<std::string> candidate = tokenize(run.answer, tokenizer);
        std::vector<std::string> reference = tokenize(item.gold, tokenizer);
        log.rouge = rouge_l(candidate, reference);
        log.bleu = bleu_4(candidate, {reference});
        log.knowledge_ids = hit_ids(run.knowledge);
        log.patient_ids = hit_ids(run.patients);
    });

    for (const auto& log : result.items) {
        result.rouge_l_f1 += log.rouge.f1;
        result.bleu_4 += log.bleu.value;
        result.bleu_4_raw += log.bleu.raw;
    }
    double n = static_cast<double>(result.items.size());
    result.rouge_l_f1 /= n;
    result.bleu_4 /= n;
    result.bleu_4_raw /= n;
    return result;
}

void export_knowledge_embeddings(const KnowledgeStore& store,
                                 const std::string& out_path) {
    std::vector<std::tuple<std::string, std::string, const EmbeddingVector*>>
        rows;
    for (const auto& entry : store.entries()) {
        std::string label;
        for (const auto& tag : entry.tags) {
            if (!label.empty()) {
                label += ";";
            }
            label += tag;
        }
        rows.emplace_back(entry.id, label, &entry.embedding);
    }
    write_embedding_csv(out_path, rows, store.dimension());
}

void export_patient_embeddings(const PatientStore& store,
                               const std::string& out_path) {
    std::vector<std::tuple<std::string, std::string, const EmbeddingVector*>>
        rows;
    for (const auto& record : store.records()) {
        std::string label;
        auto it = record.metadata.find("label");
        if (it != record.metadata.end()) {
            label = it->second;
        }
        rows.emplace_back(record.id, label, &record.embedding);
    }
    write_embedding_csv(out_path, rows, store.dimension());
}

} // namespace doctorrag
