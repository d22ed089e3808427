#pragma once

#include <string>
#include <vector>

namespace doctorrag {

// words: split on ASCII whitespace, with each ASCII punctuation character as
// its own token; multi-byte sequences stay inside words. chars: one token
// per UTF-8 code point, for unsegmented scripts. Every report names the
// mode it was computed with.
enum class TokenizerMode { words, chars };

const char* to_string(TokenizerMode mode);

std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode);

struct RougeLScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Longest-common-subsequence overlap: precision over the candidate length,
// recall over the reference length, f1 = 2PR/(P+R) with 0 when either side
// is empty or nothing matches.
RougeLScore rouge_l(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference);

struct BleuScore {
    // Geometric mean of modified 1..4-gram precisions, uniform weights,
    // times the brevity penalty. `value` applies add-one smoothing to orders
    // with a zero match count (or no n-grams at all); `raw` never smooths,
    // so any zero order zeroes it.
    double value = 0.0;
    double raw = 0.0;
};

BleuScore bleu_4(const std::vector<std::string>& candidate,
                 const std::vector<std::vector<std::string>>& references);

} // namespace doctorrag
