#pragma once

#include <optional>
#include <string>
#include <vector>

#include "doctorrag/embedding.hpp"
#include "doctorrag/store.hpp"

namespace doctorrag {

struct TaggedQuery {
    std::string id;
    std::string text;
    std::vector<std::string> tags;
    EmbeddingVector embedding;
};

struct ScoredHit {
    std::string id;
    double score = 0.0;
};

struct RetrievalConfig {
    std::size_t k = 4;
    // When enabled, excludes exact ids and near-duplicate records so held-out
    // evaluation items cannot retrieve their own source. Off for serving.
    bool leakage_guard = false;
    double leakage_threshold = 0.99;
    std::vector<std::string> exclude_ids;
};

struct RetrievalStats {
    std::size_t scanned = 0;
    std::size_t concept_filtered = 0;
    std::size_t negative_excluded = 0;
    std::size_t leakage_excluded = 0;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

struct RetrievalResult {
    std::vector<ScoredHit> hits;
    RetrievalStats stats;
};

// Concept-constrained similarity: cosine when the tag sets intersect,
// otherwise the entry is filtered out entirely (nullopt) rather than given a
// sentinel score. Throws ScoreError on zero-norm vectors.
std::optional<double> knowledge_similarity(const TaggedQuery& query,
                                           const KnowledgeEntry& entry);

// Unconstrained cosine over complaint embeddings.
double patient_similarity(const TaggedQuery& query, const PatientRecord& record);

// Exhaustive scan over the store. Hits are sorted by score descending with
// ascending id breaking exact ties, and only non-negative scores are kept.
// Entries whose score is undefined are skipped and counted in the stats.
RetrievalResult retrieve_knowledge_topk(const TaggedQuery& query,
                                        const KnowledgeStore& store,
                                        const RetrievalConfig& config);

// Same scan shape without the concept constraint or the non-negativity rule;
// the leakage guard applies here.
RetrievalResult retrieve_patients_topk(const TaggedQuery& query,
                                       const PatientStore& store,
                                       const RetrievalConfig& config);

} // namespace doctorrag
