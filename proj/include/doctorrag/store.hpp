#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "doctorrag/embedding.hpp"
#include "doctorrag/vocabulary.hpp"

namespace doctorrag {

// A declarative statement with its concept tags. Tags are kept sorted and
// deduplicated, and must be drawn from the store's vocabulary.
struct KnowledgeEntry {
    std::string id;
    std::string declarative_text;
    std::vector<std::string> tags;
    EmbeddingVector embedding;

    bool operator==(const KnowledgeEntry&) const = default;
};

// A patient case: free-text complaint plus structured fields and metadata.
struct PatientRecord {
    std::string id;
    std::string complaint_text;
    std::map<std::string, std::string> structured_data;
    std::map<std::string, std::string> metadata;
    EmbeddingVector embedding;

    bool operator==(const PatientRecord&) const = default;
};

// On-disk layout shared by both stores, as a directory:
//   manifest.json   format_version, kind, dimension, count (and, for the
//                   knowledge store, the vocabulary hash)
//   entries.jsonl   one JSON record per line, in store order
//   embeddings.f32  count * dimension little-endian 32-bit floats, record
//                   order matching entries.jsonl
// Stores are immutable after construction; save followed by load reproduces
// the store bit-exactly, and re-saving produces byte-identical files.

class KnowledgeStore {
public:
    KnowledgeStore(int dimension, std::uint64_t vocabulary_hash,
                   std::vector<KnowledgeEntry> entries);

    int dimension() const noexcept { return dimension_; }
    std::uint64_t vocabulary_hash() const noexcept { return vocabulary_hash_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<KnowledgeEntry>& entries() const noexcept { return entries_; }
    const KnowledgeEntry* find(const std::string& id) const;

    void save(const std::string& dir) const;
    static KnowledgeStore load(const std::string& dir, const ConceptVocabulary& vocabulary);

    bool operator==(const KnowledgeStore&) const = default;

private:
    int dimension_;
    std::uint64_t vocabulary_hash_;
    std::vector<KnowledgeEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

class PatientStore {
public:
    PatientStore(int dimension, std::vector<PatientRecord> records);

    int dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<PatientRecord>& records() const noexcept { return records_; }
    const PatientRecord* find(const std::string& id) const;

    void save(const std::string& dir) const;
    static PatientStore load(const std::string& dir);

    bool operator==(const PatientStore&) const = default;

private:
    int dimension_;
    std::vector<PatientRecord> records_;
    std::map<std::string, std::size_t> index_;
};

} // namespace doctorrag
