#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "doctorrag/gateway.hpp"
#include "doctorrag/templates.hpp"

namespace doctorrag {

enum class Verdict { a_wins, b_wins, tie };

const char* to_string(Verdict verdict);

// The three judged dimensions plus the derived overall verdict.
inline constexpr std::size_t kDimensionCount = 4;
inline constexpr std::array<const char*, kDimensionCount> kDimensionNames = {
    "comprehensiveness",
    "relevance",
    "safety",
    "overall",
};

struct DimensionVerdicts {
    Verdict comprehensiveness = Verdict::tie;
    Verdict relevance = Verdict::tie;
    Verdict safety = Verdict::tie;

    bool operator==(const DimensionVerdicts&) const = default;
};

struct PairwiseVerdict {
    DimensionVerdicts dimensions;
    Verdict overall = Verdict::tie;

    bool operator==(const PairwiseVerdict&) const = default;
};

struct JudgeConfig {
    // Judge each pair twice with the answers swapped and reconcile; the
    // single-pass protocol is kept available for parity with prior results.
    bool double_judging = true;
};

// Parses a judge reply of the form "Comprehensiveness: [Response A] - ...".
// Only lines anchored at a dimension name count; every dimension must appear.
std::optional<DimensionVerdicts> parse_judge_reply(const std::string& reply);

// Mean of per-dimension scores (A=1, tie=0.5, B=0) against the 0.5 midpoint.
Verdict overall_from_dimensions(const DimensionVerdicts& dims);

// Flips every verdict; used to map a swapped-order judgment back.
DimensionVerdicts flip(const DimensionVerdicts& dims);

// Judges answer_a against answer_b. With double judging the pair is judged in
// both orders: agreeing dimensions are kept, disagreeing ones become ties, and
// a single unparseable pass falls back to the other. Throws
// ModelOutputError("judging") when no pass can be parsed.
PairwiseVerdict pairwise_judge(const std::string& query,
                               const std::string& answer_a,
                               const std::string& answer_b, Gateway& gateway,
                               const TemplateCatalog& templates,
                               const JudgeConfig& config = {});

struct AnswerVariant {
    std::string name;
    std::vector<std::string> answers; // one per item, aligned with queries
};

// counts[dimension][y][x] = items where variant y beat variant x.
struct WinMatrix {
    std::vector<std::string> variants;
    std::size_t n_items = 0;
    std::array<std::vector<std::vector<std::size_t>>, kDimensionCount> wins;
    std::array<std::vector<std::vector<std::size_t>>, kDimensionCount> ties;
    std::vector<std::vector<std::size_t>> skipped; // unparseable judgments

    std::string to_json_string() const;
};

// Judges every unordered variant pair on every query. Unparseable pairs are
// tallied as skipped rather than aborting the sweep.
WinMatrix build_win_matrix(const std::vector<AnswerVariant>& variants,
                           const std::vector<std::string>& queries,
                           Gateway& gateway, const TemplateCatalog& templates,
                           const JudgeConfig& config = {});

} // namespace doctorrag
