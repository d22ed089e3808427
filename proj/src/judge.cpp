#include "doctorrag/judge.hpp"

#include <sstream>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

// Accepts "<label>: [Response A]..." or "<label>: Response A..."; the bracket
// form is what the judge prompt demands, the bare form tolerates sloppy
// models without leaving the line anchor.
std::optional<Verdict> parse_dimension_line(const std::string& line,
                                            const std::string& label) {
    std::string trimmed = trim(line);
    std::string prefix = label + ":";
    if (trimmed.size() < prefix.size() ||
        trimmed.compare(0, prefix.size(), prefix) != 0) {
        return std::nullopt;
    }
    std::string rest = trim(trimmed.substr(prefix.size()));
    if (!rest.empty() && rest.front() == '[') {
        rest = trim(rest.substr(1));
    }
    const std::string a = "Response A";
    const std::string b = "Response B";
    if (rest.compare(0, a.size(), a) == 0) {
        return Verdict::a_wins;
    }
    if (rest.compare(0, b.size(), b) == 0) {
        return Verdict::b_wins;
    }
    return std::nullopt;
}

double verdict_score(Verdict verdict) {
    switch (verdict) {
    case Verdict::a_wins: return 1.0;
    case Verdict::b_wins: return 0.0;
    case Verdict::tie: return 0.5;
    }
    return 0.5;
}

Verdict flip_one(Verdict verdict) {
    switch (verdict) {
    case Verdict::a_wins: return Verdict::b_wins;
    case Verdict::b_wins: return Verdict::a_wins;
    case Verdict::tie: return Verdict::tie;
    }
    return Verdict::tie;
}

Verdict reconcile(Verdict first, Verdict second) {
    return first == second ? first : Verdict::tie;
}

std::optional<DimensionVerdicts> judge_once(const std::string& query,
                                            const std::string& answer_a,
                                            const std::string& answer_b,
                                            Gateway& gateway,
                                            const TemplateCatalog& templates) {
    ChatRequest request;
    request.role = RoleTag::judge;
    request.system_message = templates.text("system_judge");
    request.user_message = templates.render("judge", {{"query", query},
                                                     {"answer_a", answer_a},
                                                     {"answer_b", answer_b}});
    ChatResult result = gateway.chat(request);
    return parse_judge_reply(result.text);
}

std::vector<std::vector<std::size_t>> zero_matrix(std::size_t n) {
    return std::vector<std::vector<std::size_t>>(
        n, std::vector<std::size_t>(n, 0));
}

nlohmann::json matrix_to_json(
    const std::vector<std::vector<std::size_t>>& matrix) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : matrix) {
        rows.push_back(row);
    }
    return rows;
}

} // namespace

const char* to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::a_wins: return "A";
    case Verdict::b_wins: return "B";
    case Verdict::tie: return "tie";
    }
    return "tie";
}

std::optional<DimensionVerdicts> parse_judge_reply(const std::string& reply) {
    std::optional<Verdict> comprehensiveness;
    std::optional<Verdict> relevance;
    std::optional<Verdict> safety;
    std::istringstream stream(reply);
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!comprehensiveness) {
            comprehensiveness = parse_dimension_line(line, "Comprehensiveness");
            if (comprehensiveness) continue;
        }
        if (!relevance) {
            relevance = parse_dimension_line(line, "Relevance");
            if (relevance) continue;
        }
        if (!safety) {
            safety = parse_dimension_line(line, "Safety");
        }
    }
    if (!comprehensiveness || !relevance || !safety) {
        return std::nullopt;
    }
    DimensionVerdicts dims;
    dims.comprehensiveness = *comprehensiveness;
    dims.relevance = *relevance;
    dims.safety = *safety;
    return dims;
}

Verdict overall_from_dimensions(const DimensionVerdicts& dims) {
    double score = (verdict_score(dims.comprehensiveness) +
                    verdict_score(dims.relevance) + verdict_score(dims.safety)) /
                   3.0;
    if (score > 0.5) return Verdict::a_wins;
    if (score < 0.5) return Verdict::b_wins;
    return Verdict::tie;
}

DimensionVerdicts flip(const DimensionVerdicts& dims) {
    DimensionVerdicts flipped;
    flipped.comprehensiveness = flip_one(dims.comprehensiveness);
    flipped.relevance = flip_one(dims.relevance);
    flipped.safety = flip_one(dims.safety);
    return flipped;
}

PairwiseVerdict pairwise_judge(const std::string& query,
                               const std::string& answer_a,
                               const std::string& answer_b, Gateway& gateway,
                               const TemplateCatalog& templates,
                               const JudgeConfig& config) {
    std::optional<DimensionVerdicts> forward =
        judge_once(query, answer_a, answer_b, gateway, templates);

    DimensionVerdicts dims;
    if (config.double_judging) {
        std::optional<DimensionVerdicts> swapped =
            judge_once(query, answer_b, answer_a, gateway, templates);
        std::optional<DimensionVerdicts> reversed;
        if (swapped) {
            reversed = flip(*swapped);
        }
        if (forward && reversed) {
            dims.comprehensiveness = reconcile(forward->comprehensiveness,
                                               reversed->comprehensiveness);
            dims.relevance = reconcile(forward->relevance, reversed->relevance);
            dims.safety = reconcile(forward->safety, reversed->safety);
        } else if (forward) {
            dims = *forward;
        } else if (reversed) {
            dims = *reversed;
        } else {
            throw ModelOutputError("judging",
                                   "judge reply unparseable in both orders");
        }
    } else {
        if (!forward) {
            throw ModelOutputError("judging", "judge reply unparseable");
        }
        dims = *forward;
    }

    PairwiseVerdict verdict;
    verdict.dimensions = dims;
    verdict.overall = overall_from_dimensions(dims);
    return verdict;
}

std::string WinMatrix::to_json_string() const {
    nlohmann::json doc;
    doc["variants"] = variants;
    doc["n_items"] = n_items;
    nlohmann::json dims;
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
        nlohmann::json entry;
        entry["wins"] = matrix_to_json(wins[d]);
        entry["ties"] = matrix_to_json(ties[d]);
        dims[kDimensionNames[d]] = entry;
    }
    doc["dimensions"] = dims;
    doc["skipped"] = matrix_to_json(skipped);
    return doc.dump(2) + "\n";
}

WinMatrix build_win_matrix(const std::vector<AnswerVariant>& variants,
                           const std::vector<std::string>& queries,
                           Gateway& gateway, const TemplateCatalog& templates,
                           const JudgeConfig& config) {
    for (const auto& variant : variants) {
        if (variant.answers.size() != queries.size()) {
            throw InputError("variant '" + variant.name + "' has " +
                             std::to_string(variant.answers.size()) +
                             " answers for " + std::to_string(queries.size()) +
                             " queries");
        }
    }

    WinMatrix matrix;
    matrix.n_items = queries.size();
    for (const auto& variant : variants) {
        matrix.variants.push_back(variant.name);
    }
    for (auto& dim : matrix.wins) {
        dim = zero_matrix(variants.size());
    }
    for (auto& dim : matrix.ties) {
        dim = zero_matrix(variants.size());
    }
    matrix.skipped = zero_matrix(variants.size());

    auto tally = [&matrix](std::size_t dim, std::size_t a, std::size_t b,
                           Verdict verdict) {
        switch (verdict) {
        case Verdict::a_wins: ++matrix.wins[dim][a][b]; break;
        case Verdict::b_wins: ++matrix.wins[dim][b][a]; break;
        case Verdict::tie:
            ++matrix.ties[dim][a][b];
            ++matrix.ties[dim][b][a];
            break;
        }
    };

    for (std::size_t a = 0; a < variants.size(); ++a) {
        for (std::size_t b = a + 1; b < variants.size(); ++b) {
            for (std::size_t item = 0; item < queries.size(); ++item) {
                PairwiseVerdict verdict;
                try {
                    verdict = pairwise_judge(queries[item],
                                             variants[a].answers[item],
                                             variants[b].answers[item], gateway,
                                             templates, config);
                } catch (const ModelOutputError&) {
                    ++matrix.skipped[a][b];
                    ++matrix.skipped[b][a];
                    continue;
                }
                tally(0, a, b, verdict.dimensions.comprehensiveness);
                tally(1, a, b, verdict.dimensions.relevance);
                tally(2, a, b, verdict.dimensions.safety);
                tally(3, a, b, verdict.overall);
            }
        }
    }
    return matrix;
}

} // namespace doctorrag
