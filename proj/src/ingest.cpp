#include "doctorrag/ingest.hpp"

#include <algorithm>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

std::string json_value_to_string(const nlohmann::json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

void check_unique_ids(const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i].empty()) {
            throw InputError("item " + std::to_string(i) + " has an empty id");
        }
        auto [it, inserted] = seen.emplace(ids[i], i);
        if (!inserted) {
            throw InputError("duplicate id: " + ids[i]);
        }
    }
}

} // namespace

std::vector<std::string> split_paragraph_chunks(const std::string& text,
                                                std::size_t max_chars) {
    std::vector<std::string> paragraphs;
    std::size_t begin = 0;
    while (begin < text.size()) {
        std::size_t end = text.find("\n\n", begin);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string paragraph = trim(text.substr(begin, end - begin));
        if (!paragraph.empty()) {
            paragraphs.push_back(std::move(paragraph));
        }
        begin = end + 2;
    }

    std::vector<std::string> chunks;
    std::string current;
    for (auto& paragraph : paragraphs) {
        if (current.empty()) {
            current = std::move(paragraph);
            continue;
        }
        if (current.size() + 2 + paragraph.size() <= max_chars) {
            current += "\n\n";
            current += paragraph;
        } else {
            chunks.push_back(std::move(current));
            current = std::move(paragraph);
        }
    }
    if (!current.empty()) {
        chunks.push_back(std::move(current));
    }
    return chunks;
}

Ingestor::Ingestor(Gateway& gateway, const TemplateCatalog& templates,
                   const ConceptVocabulary& vocabulary)
    : gateway_(gateway), templates_(templates), vocabulary_(vocabulary) {}

std::string Ingestor::transform_to_declarative(const RawChunk& chunk) const {
    std::string user;
    if (!chunk.answer.empty() || !chunk.options.empty()) {
        user = templates_.render("declarative", {{"question", chunk.text},
                                                 {"options", chunk.options},
                                                 {"answer", chunk.answer}});
    } else {
        user = templates_.render("declarative_chunk", {{"text", chunk.text}});
    }
    ChatRequest request;
    request.role = RoleTag::declarative;
    request.user_message = std::move(user);
    auto result = gateway_.chat(request);
    std::string statement = trim(result.text);
    if (statement.empty()) {
        throw ModelOutputError("transformation",
                               "empty statement for chunk " + chunk.id);
    }
    return statement;
}

std::vector<std::string> Ingestor::tag_concepts(const std::string& text,
                                                bool multi) const {
    // Knowledge statements and queries share the tagging template.
    std::string key = multi ? "tagger_multi" : "tagger";
    ChatRequest request;
    request.role = RoleTag::tagger;
    request.user_message = templates_.render(
        key, {{"text", text}, {"categories", vocabulary_.to_json_string()}});
    auto result = gateway_.chat(request);

    std::vector<std::string> parts;
    if (multi) {
        std::string buffer;
        for (char c : result.text) {
            if (c == ',' || c == '\n') {
                parts.push_back(buffer);
                buffer.clear();
            } else {
                buffer.push_back(c);
            }
        }
        parts.push_back(buffer);
    } else {
        parts.push_back(result.text);
    }

    std::vector<std::string> codes;
    for (const auto& part : parts) {
        if (trim(part).empty()) {
            continue;
        }
        auto code = vocabulary_.normalize(part);
        if (!code) {
            throw ModelOutputError("tagging",
                                   "reply is not a known concept code: '" +
                                       trim(result.text) + "'");
        }
        codes.push_back(*code);
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    if (codes.empty()) {
        throw ModelOutputError("tagging", "reply yields no concept code: '" +
                                              trim(result.text) + "'");
    }
    return codes;
}

EmbeddingVector Ingestor::embed_text(const std::string& text) const {
    return gateway_.embed(text);
}

std::pair<KnowledgeStore, IngestionReport>
Ingestor::ingest_knowledge(const std::vector<RawChunk>& chunks,
                           const IngestionConfig& config) const {
    if (gateway_.dimension() < 1) {
        throw ContractError("ingestion requires a gateway with a configured "
                            "embedding dimension");
    }
    std::vector<std::string> ids;
    ids.reserve(chunks.size());
    for (const auto& chunk : chunks) {
        ids.push_back(chunk.id);
    }
    check_unique_ids(ids);

    struct Outcome {
        KnowledgeEntry entry;
        IngestionItemReport report;
    };
    std::vector<Outcome> outcomes(chunks.size());

    for_each_index(chunks.size(), config.concurrency, [&](std::size_t i) {
        const auto& chunk = chunks[i];
        auto& outcome = outcomes[i];
        outcome.report.id = chunk.id;
        std::string stage = "transform";
        try {
            outcome.entry.id = chunk.id;
            outcome.entry.declarative_text = transform_to_declarative(chunk);
            stage = "tag";
            outcome.entry.tags =
                tag_concepts(outcome.entry.declarative_text, config.multi_tag);
            stage = "embed";
            outcome.entry.embedding = embed_text(outcome.entry.declarative_text);
            outcome.report.ok = true;
        } catch (const Error& e) {
            outcome.report.ok = false;
            outcome.report.stage = stage;
            outcome.report.message = e.what();
        }
    });

    IngestionReport report;
    std::vector<KnowledgeEntry> entries;
    for (auto& outcome : outcomes) {
        if (outcome.report.ok) {
            ++report.succeeded;
            entries.push_back(std::move(outcome.entry));
        } else {
            ++report.failed;
        }
        report.items.push_back(std::move(outcome.report));
    }
    KnowledgeStore store(gateway_.dimension(), vocabulary_.hash(),
                         std::move(entries));
    return {std::move(store), std::move(report)};
}

std::pair<PatientStore, IngestionReport>
Ingestor::ingest_patients(const std::vector<RawPatientRow>& rows,
                          const IngestionConfig& config) const {
    if (gateway_.dimension() < 1) {
        throw ContractError("ingestion requires a gateway with a configured "
                            "embedding dimension");
    }
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (const auto& row : rows) {
        ids.push_back(row.id);
    }
    check_unique_ids(ids);

    struct Outcome {
        PatientRecord record;
        IngestionItemReport report;
    };
    std::vector<Outcome> outcomes(rows.size());

    for_each_index(rows.size(), config.concurrency, [&](std::size_t i) {
        const auto& row = rows[i];
        auto& outcome = outcomes[i];
        outcome.report.id = row.id;
        std::string stage = "validate";
        try {
            if (trim(row.complaint).empty()) {
                throw InputError("complaint text is empty");
            }
            outcome.record.id = row.id;
            outcome.record.complaint_text = row.complaint;
            outcome.record.structured_data = row.structured;
            outcome.record.metadata = row.metadata;
            stage = "embed";
            outcome.record.embedding = embed_text(row.complaint);
            outcome.report.ok = true;
        } catch (const Error& e) {
            outcome.report.ok = false;
            outcome.report.stage = stage;
            outcome.report.message = e.what();
        }
    });

    IngestionReport report;
    std::vector<PatientRecord> records;
    for (auto& outcome : outcomes) {
        if (outcome.report.ok) {
            ++report.succeeded;
            records.push_back(std::move(outcome.record));
        } else {
            ++report.failed;
        }
        report.items.push_back(std::move(outcome.report));
    }
    PatientStore store(gateway_.dimension(), std::move(records));
    return {std::move(store), std::move(report)};
}

std::vector<RawChunk> read_knowledge_file(const std::string& path,
                                          const KnowledgeMapping& mapping) {
    auto lines = read_lines(path);
    std::vector<RawChunk> chunks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            continue;
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path + " line " + std::to_string(i + 1) + ": " +
                             e.what());
        }
        if (!doc.contains(mapping.id_field) || !doc.contains(mapping.text_field)) {
            throw InputError(path + " line " + std::to_string(i + 1) +
                             ": missing field '" + mapping.id_field + "' or '" +
                             mapping.text_field + "'");
        }
        RawChunk chunk;
        chunk.id = json_value_to_string(doc[mapping.id_field]);
        chunk.text = json_value_to_string(doc[mapping.text_field]);
        if (doc.contains(mapping.options_field)) {
            chunk.options = json_value_to_string(doc[mapping.options_field]);
        }
        if (doc.contains(mapping.answer_field)) {
            chunk.answer = json_value_to_string(doc[mapping.answer_field]);
        }
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

std::vector<RawPatientRow> read_patient_file(const std::string& path,
                                             const PatientMapping& mapping) {
    auto lines = read_lines(path);
    std::vector<RawPatientRow> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            continue;
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path + " line " + std::to_string(i + 1) + ": " +
                             e.what());
        }
        if (!doc.contains(mapping.id_field) ||
            !doc.contains(mapping.complaint_field)) {
            throw InputError(path + " line " + std::to_string(i + 1) +
                             ": missing field '" + mapping.id_field + "' or '" +
                             mapping.complaint_field + "'");
        }
        RawPatientRow row;
        row.id = json_value_to_string(doc[mapping.id_field]);
        row.complaint = json_value_to_string(doc[mapping.complaint_field]);
        for (const auto& [key, value] : doc.items()) {
            if (key == mapping.id_field || key == mapping.complaint_field) {
                continue;
            }
            bool is_metadata =
                std::find(mapping.metadata_fields.begin(),
                          mapping.metadata_fields.end(),
                          key) != mapping.metadata_fields.end();
            if (is_metadata) {
                row.metadata[key] = json_value_to_string(value);
            } else {
                row.structured[key] = json_value_to_string(value);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

KnowledgeMapping knowledge_mapping_from_file(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("mapping " + path + ": " + e.what());
    }
    KnowledgeMapping mapping;
    for (const auto& [key, value] : doc.items()) {
        if (key == "id") {
            mapping.id_field = value.get<std::string>();
        } else if (key == "text") {
            mapping.text_field = value.get<std::string>();
        } else if (key == "options") {
            mapping.options_field = value.get<std::string>();
        } else if (key == "answer") {
            mapping.answer_field = value.get<std::string>();
        } else {
            throw InputError("mapping " + path + ": unknown key '" + key + "'");
        }
    }
    return mapping;
}

PatientMapping patient_mapping_from_file(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("mapping " + path + ": " + e.what());
    }
    PatientMapping mapping;
    for (const auto& [key, value] : doc.items()) {
        if (key == "id") {
            mapping.id_field = value.get<std::string>();
        } else if (key == "complaint") {
            mapping.complaint_field = value.get<std::string>();
        } else if (key == "metadata_fields") {
            mapping.metadata_fields = value.get<std::vector<std::string>>();
        } else {
            throw InputError("mapping " + path + ": unknown key '" + key + "'");
        }
    }
    return mapping;
}

} // namespace doctorrag
