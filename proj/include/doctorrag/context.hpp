#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doctorrag/retrieval.hpp"
#include "doctorrag/store.hpp"

namespace doctorrag {

// Prompt-ready retrieval context: the knowledge section first, then the
// patient-case section, hit order preserved.
struct AggregatedContext {
    std::vector<std::string> knowledge_ids;
    std::vector<std::string> patient_ids;
    std::string rendered;
    bool empty = false;
    std::uint64_t token_estimate = 0;
};

// Resolves hits against the stores and renders both sections. A hit id that
// is not present in its store raises InputError. Rendering is deterministic:
// identical inputs produce identical bytes.
AggregatedContext aggregate_context(const std::vector<ScoredHit>& knowledge_hits,
                                    const std::vector<ScoredHit>& patient_hits,
                                    const KnowledgeStore& knowledge,
                                    const PatientStore& patients);

// Renders one patient record as the case block used inside the context.
std::string format_patient_record(const PatientRecord& record);

} // namespace doctorrag
