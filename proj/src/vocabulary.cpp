#include "doctorrag/vocabulary.hpp"

#include <cctype>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

const std::pair<const char*, const char*> kIcd10FirstLevel[] = {
    {"A00-B99", "Certain infectious and parasitic diseases"},
    {"C00-D48", "Neoplasms"},
    {"D50-D89", "Diseases of the blood and blood-forming organs and certain "
                "disorders involving the immune mechanism"},
    {"E00-E90", "Endocrine, nutritional and metabolic diseases"},
    {"F00-F99", "Mental and behavioural disorders"},
    {"G00-G99", "Diseases of the nervous system"},
    {"H00-H59", "Diseases of the eye and adnexa"},
    {"H60-H95", "Diseases of the ear and mastoid process"},
    {"I00-I99", "Diseases of the circulatory system"},
    {"J00-J99", "Diseases of the respiratory system"},
    {"K00-K93", "Diseases of the digestive system"},
    {"L00-L99", "Diseases of the skin and subcutaneous tissue"},
    {"M00-M99", "Diseases of the musculoskeletal system and connective tissue"},
    {"N00-N99", "Diseases of the genitourinary system"},
    {"O00-O99", "Pregnancy, childbirth and the puerperium"},
    {"P00-P96", "Certain conditions originating in the perinatal period"},
    {"Q00-Q99", "Congenital malformations, deformations and chromosomal "
                "abnormalities"},
    {"R00-R99", "Symptoms, signs and abnormal clinical and laboratory findings, "
                "not elsewhere classified"},
    {"S00-T98", "Injury, poisoning and certain other consequences of external "
                "causes"},
    {"U00-U99", "Codes for special purposes"},
    {"V01-Y98", "External causes of morbidity and mortality"},
    {"Z00-Z99", "Factors influencing health status and contact with health "
                "services"},
};

std::string to_upper_ascii(std::string text) {
    for (char& c : text) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return text;
}

} // namespace

ConceptVocabulary ConceptVocabulary::icd10_first_level() {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [code, label] : kIcd10FirstLevel) {
        entries.emplace_back(code, label);
    }
    return ConceptVocabulary(std::move(entries));
}

ConceptVocabulary ConceptVocabulary::load(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("vocabulary " + path + ": " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw InputError("vocabulary " + path + ": expected a non-empty array");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("code") || !item.contains("label")) {
            throw InputError("vocabulary " + path +
                             ": entries need code and label fields");
        }
        entries.emplace_back(item["code"].get<std::string>(),
                             item["label"].get<std::string>());
    }
    return ConceptVocabulary(std::move(entries));
}

ConceptVocabulary::ConceptVocabulary(
    std::vector<std::pair<std::string, std::string>> entries) {
    codes_.reserve(entries.size());
    labels_.reserve(entries.size());
    for (auto& [code, label] : entries) {
        if (code.empty()) {
            throw InputError("vocabulary code must be non-empty");
        }
        for (const auto& existing : codes_) {
            if (existing == code) {
                throw InputError("duplicate vocabulary code: " + code);
            }
        }
        codes_.push_back(std::move(code));
        labels_.push_back(std::move(label));
    }
}

bool ConceptVocabulary::contains(const std::string& code) const {
    for (const auto& existing : codes_) {
        if (existing == code) {
            return true;
        }
    }
    return false;
}

const std::string& ConceptVocabulary::label(const std::string& code) const {
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i] == code) {
            return labels_[i];
        }
    }
    throw InputError("unknown vocabulary code: " + code);
}

std::optional<std::string> ConceptVocabulary::normalize(const std::string& reply) const {
    std::string candidate = to_upper_ascii(trim(reply));
    if (contains(candidate)) {
        return candidate;
    }
    return std::nullopt;
}

std::string ConceptVocabulary::to_json_string() const {
    nlohmann::json doc = nlohmann::json::object();
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        doc[codes_[i]] = labels_[i];
    }
    return doc.dump();
}

std::uint64_t ConceptVocabulary::hash() const {
    std::uint64_t digest = fnv1a64("concept-vocabulary");
    for (const auto& code : codes_) {
        digest = fnv1a64(code, digest);
        digest = fnv1a64("\x1f", digest);
    }
    return digest;
}

} // namespace doctorrag
