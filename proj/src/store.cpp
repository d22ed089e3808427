#include "doctorrag/store.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

constexpr int kFormatVersion = 1;

void append_f32le(std::string& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float read_f32le(const char* data) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                         (static_cast<std::uint32_t>(bytes[1]) << 8) |
                         (static_cast<std::uint32_t>(bytes[2]) << 16) |
                         (static_cast<std::uint32_t>(bytes[3]) << 24);
    float value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
}

std::string embeddings_blob(const std::vector<EmbeddingVector>& vectors) {
    std::string out;
    if (!vectors.empty()) {
        out.reserve(vectors.size() * vectors.front().dimension() * 4);
    }
    for (const auto& vector : vectors) {
        for (float v : vector.values()) {
            append_f32le(out, v);
        }
    }
    return out;
}

std::vector<EmbeddingVector> parse_embeddings(const std::string& blob,
                                              std::size_t count, int dimension,
                                              const std::string& dir) {
    std::size_t expected = count * static_cast<std::size_t>(dimension) * 4;
    if (blob.size() != expected) {
        throw FormatError("embeddings file in " + dir + " holds " +
                          std::to_string(blob.size()) + " bytes, expected " +
                          std::to_string(expected));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(count);
    const char* cursor = blob.data();
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<float> values(static_cast<std::size_t>(dimension));
        for (auto& v : values) {
            v = read_f32le(cursor);
            cursor += 4;
        }
        out.emplace_back(std::move(values));
    }
    return out;
}

nlohmann::json load_manifest(const std::string& dir, const std::string& kind) {
    namespace fs = std::filesystem;
    fs::path path = fs::path(dir) / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("manifest in " + dir + ": " + e.what());
    }
    int version = manifest.value("format_version", -1);
    if (version != kFormatVersion) {
        throw FormatError("store " + dir + " has format version " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
    }
    if (manifest.value("kind", std::string()) != kind) {
        throw FormatError("store " + dir + " has kind '" +
                          manifest.value("kind", std::string()) +
                          "', expected '" + kind + "'");
    }
    if (!manifest.contains("dimension") || !manifest.contains("count")) {
        throw FormatError("manifest in " + dir + " lacks dimension or count");
    }
    return manifest;
}

std::vector<nlohmann::json> load_entry_lines(const std::string& dir,
                                             std::size_t count) {
    namespace fs = std::filesystem;
    fs::path path = fs::path(dir) / "entries.jsonl";
    auto lines = read_lines(path.string());
    if (lines.size() != count) {
        throw FormatError("entries file in " + dir + " holds " +
                          std::to_string(lines.size()) + " records, manifest says " +
                          std::to_string(count));
    }
    std::vector<nlohmann::json> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            out.push_back(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("entries line " + std::to_string(i + 1) + " in " +
                              dir + ": " + e.what());
        }
    }
    return out;
}

void save_store_files(const std::string& dir, const nlohmann::json& manifest,
                      const std::vector<std::string>& entry_lines,
                      const std::string& blob) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::string entries;
    for (const auto& line : entry_lines) {
        entries += line;
        entries += '\n';
    }
    write_file_atomic((fs::path(dir) / "manifest.json").string(),
                      manifest.dump(2) + "\n");
    write_file_atomic((fs::path(dir) / "entries.jsonl").string(), entries);
    write_file_atomic((fs::path(dir) / "embeddings.f32").string(), blob);
}

} // namespace

KnowledgeStore::KnowledgeStore(int dimension, std::uint64_t vocabulary_hash,
                               std::vector<KnowledgeEntry> entries)
    : dimension_(dimension), vocabulary_hash_(vocabulary_hash),
      entries_(std::move(entries)) {
    if (dimension_ < 1) {
        throw InputError("store dimension must be positive");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto& entry = entries_[i];
        if (entry.id.empty()) {
            throw InputError("knowledge entry " + std::to_string(i) +
                             " has an empty id");
        }
        if (entry.embedding.dimension() != static_cast<std::size_t>(dimension_)) {
            throw InputError("knowledge entry " + entry.id + " has dimension " +
                             std::to_string(entry.embedding.dimension()) +
                             ", store expects " + std::to_string(dimension_));
        }
        std::sort(entry.tags.begin(), entry.tags.end());
        entry.tags.erase(std::unique(entry.tags.begin(), entry.tags.end()),
                         entry.tags.end());
        if (!index_.emplace(entry.id, i).second) {
            throw InputError("duplicate knowledge entry id: " + entry.id);
        }
    }
}

const KnowledgeEntry* KnowledgeStore::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

void KnowledgeStore::save(const std::string& dir) const {
    nlohmann::json manifest{
        {"count", entries_.size()},
        {"dimension", dimension_},
        {"format_version", kFormatVersion},
        {"kind", "knowledge"},
        {"vocabulary_hash", hex64(vocabulary_hash_)},
    };
    std::vector<std::string> lines;
    std::vector<EmbeddingVector> vectors;
    lines.reserve(entries_.size());
    vectors.reserve(entries_.size());
    for (const auto& entry : entries_) {
        nlohmann::json record{
            {"id", entry.id},
            {"tags", entry.tags},
            {"text", entry.declarative_text},
        };
        lines.push_back(record.dump());
        vectors.push_back(entry.embedding);
    }
    save_store_files(dir, manifest, lines, embeddings_blob(vectors));
}

KnowledgeStore KnowledgeStore::load(const std::string& dir,
                                    const ConceptVocabulary& vocabulary) {
    auto manifest = load_manifest(dir, "knowledge");
    int dimension = manifest["dimension"].get<int>();
    std::size_t count = manifest["count"].get<std::size_t>();
    std::string stored_hash = manifest.value("vocabulary_hash", std::string());
    if (stored_hash != hex64(vocabulary.hash())) {
        throw FormatError("store " + dir + " was built against a different "
                          "vocabulary (hash " + stored_hash + ")");
    }

    auto records = load_entry_lines(dir, count);
    namespace fs = std::filesystem;
    auto blob = read_file((fs::path(dir) / "embeddings.f32").string());
    auto vectors = parse_embeddings(blob, count, dimension, dir);

    std::vector<KnowledgeEntry> entries;
    entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& record = records[i];
        if (!record.contains("id") || !record.contains("text") ||
            !record.contains("tags")) {
            throw FormatError("entries line " + std::to_string(i + 1) + " in " +
                              dir + " lacks id, text, or tags");
        }
        KnowledgeEntry entry;
        entry.id = record["id"].get<std::string>();
        entry.declarative_text = record["text"].get<std::string>();
        entry.tags = record["tags"].get<std::vector<std::string>>();
        for (const auto& tag : entry.tags) {
            if (!vocabulary.contains(tag)) {
                throw FormatError("entry " + entry.id + " in " + dir +
                                  " carries unknown concept code: " + tag);
            }
        }
        entry.embedding = vectors[i];
        entries.push_back(std::move(entry));
    }
    return KnowledgeStore(dimension, vocabulary.hash(), std::move(entries));
}

PatientStore::PatientStore(int dimension, std::vector<PatientRecord> records)
    : dimension_(dimension), records_(std::move(records)) {
    if (dimension_ < 1) {
        throw InputError("store dimension must be positive");
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& record = records_[i];
        if (record.id.empty()) {
            throw InputError("patient record " + std::to_string(i) +
                             " has an empty id");
        }
        if (record.embedding.dimension() != static_cast<std::size_t>(dimension_)) {
            throw InputError("patient record " + record.id + " has dimension " +
                             std::to_string(record.embedding.dimension()) +
                             ", store expects " + std::to_string(dimension_));
        }
        if (!index_.emplace(record.id, i).second) {
            throw InputError("duplicate patient record id: " + record.id);
        }
    }
}

const PatientRecord* PatientStore::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

void PatientStore::save(const std::string& dir) const {
    nlohmann::json manifest{
        {"count", records_.size()},
        {"dimension", dimension_},
        {"format_version", kFormatVersion},
        {"kind", "patient"},
    };
    std::vector<std::string> lines;
    std::vector<EmbeddingVector> vectors;
    lines.reserve(records_.size());
    vectors.reserve(records_.size());
    for (const auto& record : records_) {
        nlohmann::json doc{
            {"complaint", record.complaint_text},
            {"id", record.id},
            {"metadata", record.metadata},
            {"structured", record.structured_data},
        };
        lines.push_back(doc.dump());
        vectors.push_back(record.embedding);
    }
    save_store_files(dir, manifest, lines, embeddings_blob(vectors));
}

PatientStore PatientStore::load(const std::string& dir) {
    auto manifest = load_manifest(dir, "patient");
    int dimension = manifest["dimension"].get<int>();
    std::size_t count = manifest["count"].get<std::size_t>();

    auto docs = load_entry_lines(dir, count);
    namespace fs = std::filesystem;
    auto blob = read_file((fs::path(dir) / "embeddings.f32").string());
    auto vectors = parse_embeddings(blob, count, dimension, dir);

    std::vector<PatientRecord> records;
    records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& doc = docs[i];
        if (!doc.contains("id") || !doc.contains("complaint")) {
            throw FormatError("entries line " + std::to_string(i + 1) + " in " +
                              dir + " lacks id or complaint");
        }
        PatientRecord record;
        record.id = doc["id"].get<std::string>();
        record.complaint_text = doc["complaint"].get<std::string>();
        if (doc.contains("structured")) {
            record.structured_data =
                doc["structured"].get<std::map<std::string, std::string>>();
        }
        if (doc.contains("metadata")) {
            record.metadata =
                doc["metadata"].get<std::map<std::string, std::string>>();
        }
        record.embedding = vectors[i];
        records.push_back(std::move(record));
    }
    return PatientStore(dimension, std::move(records));
}

} // namespace doctorrag
