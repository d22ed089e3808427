#include "doctorrag/retrieval.hpp"

#include <algorithm>

#include "doctorrag/error.hpp"

namespace doctorrag {

namespace {

bool tags_intersect(const std::vector<std::string>& a,
                    const std::vector<std::string>& b) {
    for (const auto& tag : a) {
        for (const auto& other : b) {
            if (tag == other) {
                return true;
            }
        }
    }
    return false;
}

void sort_and_truncate(std::vector<ScoredHit>& hits, std::size_t k) {
    std::sort(hits.begin(), hits.end(),
              [](const ScoredHit& a, const ScoredHit& b) {
                  if (a.score != b.score) {
                      return a.score > b.score;
                  }
                  return a.id < b.id;
              });
    if (hits.size() > k) {
        hits.resize(k);
    }
}

} // namespace

std::optional<double> knowledge_similarity(const TaggedQuery& query,
                                           const KnowledgeEntry& entry) {
    if (!tags_intersect(query.tags, entry.tags)) {
        return std::nullopt;
    }
    return cosine_similarity(query.embedding, entry.embedding);
}

double patient_similarity(const TaggedQuery& query, const PatientRecord& record) {
    return cosine_similarity(query.embedding, record.embedding);
}

RetrievalResult retrieve_knowledge_topk(const TaggedQuery& query,
                                        const KnowledgeStore& store,
                                        const RetrievalConfig& config) {
    RetrievalResult result;
    for (const auto& entry : store.entries()) {
        ++result.stats.scanned;
        std::optional<double> score;
        try {
            score = knowledge_similarity(query, entry);
        } catch (const ScoreError& e) {
            ++result.stats.skipped;
            result.stats.warnings.push_back(entry.id + ": " + e.what());
            continue;
        }
        if (!score) {
            ++result.stats.concept_filtered;
            continue;
        }
        if (*score < 0.0) {
            ++result.stats.negative_excluded;
            continue;
        }
        result.hits.push_back({entry.id, *score});
    }
    sort_and_truncate(result.hits, config.k);
    return result;
}

RetrievalResult retrieve_patients_topk(const TaggedQuery& query,
                                       const PatientStore& store,
                                       const RetrievalConfig& config) {
    RetrievalResult result;
    for (const auto& record : store.records()) {
        ++result.stats.scanned;
        double score;
        try {
            score = patient_similarity(query, record);
        } catch (const ScoreError& e) {
            ++result.stats.skipped;
            result.stats.warnings.push_back(record.id + ": " + e.what());
            continue;
        }
        if (config.leakage_guard) {
            bool excluded_id =
                std::find(config.exclude_ids.begin(), config.exclude_ids.end(),
                          record.id) != config.exclude_ids.end();
            if (excluded_id || score > config.leakage_threshold) {
                ++result.stats.leakage_excluded;
                continue;
            }
        }
        result.hits.push_back({record.id, score});
    }
    sort_and_truncate(result.hits, config.k);
    return result;
}

} // namespace doctorrag
