#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace doctorrag {

// Closed, ordered set of first-level concept codes with display labels.
// Immutable once constructed; tag sets on stored entries must be subsets.
class ConceptVocabulary {
public:
    // The 22 first-level ICD-10 chapter ranges.
    static ConceptVocabulary icd10_first_level();

    // JSON file: array of {"code": ..., "label": ...} objects, in order.
    static ConceptVocabulary load(const std::string& path);

    explicit ConceptVocabulary(std::vector<std::pair<std::string, std::string>> entries);

    bool contains(const std::string& code) const;
    const std::vector<std::string>& codes() const noexcept { return codes_; }
    const std::string& label(const std::string& code) const;
    std::size_t size() const noexcept { return codes_.size(); }

    // Trim plus upper-casing, then exact code match; nullopt when the result
    // is not a known code.
    std::optional<std::string> normalize(const std::string& reply) const;

    // Compact JSON object {code: label, ...} for interpolation into prompts.
    std::string to_json_string() const;

    // Order-sensitive digest over the codes; stamped into store manifests so
    // a store cannot be silently read against a different vocabulary.
    std::uint64_t hash() const;

private:
    std::vector<std::string> codes_;
    std::vector<std::string> labels_;
};

} // namespace doctorrag
