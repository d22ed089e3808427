#include "doctorrag/context.hpp"

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

std::string format_patient_record(const PatientRecord& record) {
    std::string out = "Retrieved Patient Case (ID: " + record.id + "):\n\n";
    out += "Complaint: " + record.complaint_text;
    for (const auto& [key, value] : record.structured_data) {
        out += "\n" + key + ": " + value;
    }
    for (const auto& [key, value] : record.metadata) {
        out += "\n" + key + ": " + value;
    }
    return out;
}

AggregatedContext aggregate_context(const std::vector<ScoredHit>& knowledge_hits,
                                    const std::vector<ScoredHit>& patient_hits,
                                    const KnowledgeStore& knowledge,
                                    const PatientStore& patients) {
    AggregatedContext context;
    std::string out = "--- General Medical Knowledge (Expertise) ---\n";
    if (knowledge_hits.empty()) {
        out += "\n(none)\n";
    }
    for (const auto& hit : knowledge_hits) {
        const KnowledgeEntry* entry = knowledge.find(hit.id);
        if (entry == nullptr) {
            throw InputError("knowledge hit id not in store: " + hit.id);
        }
        context.knowledge_ids.push_back(hit.id);
        out += "\n" + entry->declarative_text + "\n";
    }
    out += "\n--- Retrieved Patient Cases (Experience) ---\n";
    if (patient_hits.empty()) {
        out += "\n(none)\n";
    }
    for (const auto& hit : patient_hits) {
        const PatientRecord* record = patients.find(hit.id);
        if (record == nullptr) {
            throw InputError("patient hit id not in store: " + hit.id);
        }
        context.patient_ids.push_back(hit.id);
        out += "\n" + format_patient_record(*record) + "\n";
    }
    context.rendered = std::move(out);
    context.empty = knowledge_hits.empty() && patient_hits.empty();
    context.token_estimate = estimate_tokens(context.rendered);
    return context;
}

} // namespace doctorrag
