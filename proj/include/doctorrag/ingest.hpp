#pragma once

#include <string>
#include <utility>
#include <vector>

#include "doctorrag/gateway.hpp"
#include "doctorrag/store.hpp"
#include "doctorrag/templates.hpp"
#include "doctorrag/vocabulary.hpp"

namespace doctorrag {

// Raw knowledge input. When options and answer are present the chunk is a
// multiple-choice Q/A pair and the transformation folds question and correct
// answer into one statement; otherwise the text is treated as a reference
// passage.
struct RawChunk {
    std::string id;
    std::string text;
    std::string options;
    std::string answer;
};

struct RawPatientRow {
    std::string id;
    std::string complaint;
    std::map<std::string, std::string> structured;
    std::map<std::string, std::string> metadata;
};

struct IngestionItemReport {
    std::string id;
    bool ok = false;
    std::string stage;   // transform | tag | embed | validate, empty on success
    std::string message;
};

struct IngestionReport {
    std::vector<IngestionItemReport> items;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
};

struct IngestionConfig {
    bool multi_tag = false;
    // Worker count for per-item agent calls; results are committed in input
    // order regardless of completion order.
    int concurrency = 1;
};

// Splits text into chunks at paragraph boundaries (blank lines), packing
// consecutive paragraphs while the budget allows. A single paragraph larger
// than the budget becomes its own oversized chunk.
std::vector<std::string> split_paragraph_chunks(const std::string& text,
                                                std::size_t max_chars = 1200);

// Builds stores by running the transformation, tagging, and embedding agents
// per item. Item failures are isolated: a failing item is recorded in the
// report and skipped while the batch continues.
class Ingestor {
public:
    Ingestor(Gateway& gateway, const TemplateCatalog& templates,
             const ConceptVocabulary& vocabulary);

    // Throws ModelOutputError when the reply is empty after trimming.
    std::string transform_to_declarative(const RawChunk& chunk) const;

    // Normalizes the reply against the vocabulary; unknown codes raise
    // ModelOutputError carrying the raw reply. Multi-code replies are split
    // on commas; the returned set is sorted, deduplicated, and non-empty.
    std::vector<std::string> tag_concepts(const std::string& text, bool multi) const;

    EmbeddingVector embed_text(const std::string& text) const;

    // Duplicate chunk ids raise InputError before any agent call.
    std::pair<KnowledgeStore, IngestionReport>
    ingest_knowledge(const std::vector<RawChunk>& chunks,
                     const IngestionConfig& config = {}) const;

    // Rows with an empty complaint are rejected into the report.
    std::pair<PatientStore, IngestionReport>
    ingest_patients(const std::vector<RawPatientRow>& rows,
                    const IngestionConfig& config = {}) const;

private:
    Gateway& gateway_;
    const TemplateCatalog& templates_;
    const ConceptVocabulary& vocabulary_;
};

// Column mappings adapt line-delimited JSON corpora with arbitrary field
// names onto the raw input shapes.
struct KnowledgeMapping {
    std::string id_field = "id";
    std::string text_field = "text";
    std::string options_field = "options";
    std::string answer_field = "answer";
};

struct PatientMapping {
    std::string id_field = "id";
    std::string complaint_field = "complaint";
    // Fields routed into metadata; every other field goes to structured_data.
    std::vector<std::string> metadata_fields;
};

std::vector<RawChunk> read_knowledge_file(const std::string& path,
                                          const KnowledgeMapping& mapping = {});
std::vector<RawPatientRow> read_patient_file(const std::string& path,
                                             const PatientMapping& mapping = {});

KnowledgeMapping knowledge_mapping_from_file(const std::string& path);
PatientMapping patient_mapping_from_file(const std::string& path);

} // namespace doctorrag
