#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "doctorrag/context.hpp"
#include "doctorrag/gateway.hpp"
#include "doctorrag/metrics.hpp"
#include "doctorrag/retrieval.hpp"
#include "doctorrag/store.hpp"
#include "doctorrag/templates.hpp"
#include "doctorrag/vocabulary.hpp"

namespace doctorrag {

enum class TaskKind {
    disease_diagnosis,
    question_answering,
    treatment_recommendation,
    text_generation,
};

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

// True for the kinds scored by exact label match; text_generation is scored
// by overlap metrics instead.
bool is_labeled_kind(TaskKind kind);

struct TaskItem {
    std::string query;
    std::string gold; // label for labeled kinds, reference text otherwise
    std::string source_record_id; // patient record to shield from retrieval
};

struct LabeledTask {
    TaskKind kind = TaskKind::disease_diagnosis;
    std::vector<std::string> valid_labels; // empty for text_generation
    std::vector<TaskItem> items;
};

// Reads a line-delimited task file ({"query","gold","source_record_id"?})
// plus, for labeled kinds, a label-vocabulary file (one label per line).
// Every gold label must be in the vocabulary.
LabeledTask load_task(const std::string& items_path, TaskKind kind,
                      const std::string& labels_path = "");

// Wires the loaded stores and agents together; non-owning.
struct Pipeline {
    Gateway* gateway = nullptr;
    const TemplateCatalog* templates = nullptr;
    const ConceptVocabulary* vocabulary = nullptr;
    const KnowledgeStore* knowledge = nullptr;
    const PatientStore* patients = nullptr;
    RetrievalConfig retrieval;
    bool multi_tag = false;
};

// Tags and embeds free query text so it can be scored against both stores.
TaggedQuery prepare_query(const Pipeline& pipeline, const std::string& query_text,
                          const std::string& query_id = "query");

// One retrieve-and-generate pass: everything the caller needs to inspect or
// log about a single query.
struct QueryRun {
    TaggedQuery query;
    RetrievalResult knowledge;
    RetrievalResult patients;
    AggregatedContext context;
    std::string answer;
};

// Retrieves from both stores, aggregates the context, and asks the generator.
// Non-empty `options` switches to the closed-label prompt that restricts the
// reply to those options.
QueryRun answer_query(const Pipeline& pipeline, const std::string& query_text,
                      const std::vector<std::string>& options = {});

struct LabeledItemLog {
    std::size_t index = 0;
    std::string query;
    std::string gold;
    std::string raw_prediction;
    std::string normalized_prediction;
    bool correct = false;
    bool invalid_label = false; // prediction outside the label vocabulary
    std::vector<std::string> knowledge_ids;
    std::vector<std::string> patient_ids;
};

struct LabeledTaskResult {
    double accuracy = 0.0;
    std::size_t n_items = 0;
    std::size_t n_correct = 0;
    std::vector<LabeledItemLog> items;
};

// Scores by normalized exact match. The leakage guard is forced on: each
// item's source record id is excluded from patient retrieval along with
// near-duplicates above the configured threshold.
LabeledTaskResult run_labeled_task(const LabeledTask& task,
                                   const Pipeline& pipeline,
                                   int concurrency = 1);

struct GenerationItemLog {
    std::size_t index = 0;
    std::string query;
    std::string reference;
    std::string answer;
    RougeLScore rouge;
    BleuScore bleu;
    std::vector<std::string> knowledge_ids;
    std::vector<std::string> patient_ids;
};

struct GenerationTaskResult {
    TokenizerMode tokenizer = TokenizerMode::words;
    double rouge_l_f1 = 0.0; // means over items
    double bleu_4 = 0.0;
    double bleu_4_raw = 0.0;
    std::vector<GenerationItemLog> items;
};

// Metrics that reports must list as absent (they need external models).
const std::vector<std::string>& absent_metrics();

GenerationTaskResult run_generation_task(const LabeledTask& task,
                                         const Pipeline& pipeline,
                                         TokenizerMode tokenizer,
                                         int concurrency = 1);

// CSV of (id, label, D vector columns); floats carry 9 significant digits so
// a parse-back restores them bit-exactly. Label is the joined concept tags
// for knowledge entries and the "label" metadata value for patients.
void export_knowledge_embeddings(const KnowledgeStore& store,
                                 const std::string& out_path);
void export_patient_embeddings(const PatientStore& store,
                               const std::string& out_path);

} // namespace doctorrag
