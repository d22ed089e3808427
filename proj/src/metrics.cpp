#include "doctorrag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace doctorrag {

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

bool is_ascii_punct(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

std::size_t utf8_sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1; // invalid byte, consume it alone
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (is_ascii_space(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else if (is_ascii_punct(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            tokens.push_back(std::string(1, c));
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::vector<std::string> tokenize_chars(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t len =
            utf8_sequence_length(static_cast<unsigned char>(text[pos]));
        len = std::min(len, text.size() - pos);
        std::string token = text.substr(pos, len);
        pos += len;
        if (token.size() == 1 && is_ascii_space(token[0])) {
            continue;
        }
        tokens.push_back(std::move(token));
    }
    return tokens;
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) {
        return 0;
    }
    std::vector<std::size_t> previous(b.size() + 1, 0);
    std::vector<std::size_t> current(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) {
                current[j] = previous[j - 1] + 1;
            } else {
                current[j] = std::max(previous[j], current[j - 1]);
            }
        }
        std::swap(previous, current);
    }
    return previous[b.size()];
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string> gram(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() + static_cast<long>(i + n));
        ++counts[std::move(gram)];
    }
    return counts;
}

} // namespace

const char* to_string(TokenizerMode mode) {
    return mode == TokenizerMode::words ? "words" : "chars";
}

std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode) {
    return mode == TokenizerMode::words ? tokenize_words(text)
                                        : tokenize_chars(text);
}

RougeLScore rouge_l(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference) {
    RougeLScore score;
    if (candidate.empty() || reference.empty()) {
        return score;
    }
    double lcs = static_cast<double>(lcs_length(candidate, reference));
    score.precision = lcs / static_cast<double>(candidate.size());
    score.recall = lcs / static_cast<double>(reference.size());
    if (score.precision + score.recall > 0.0) {
        score.f1 = 2.0 * score.precision * score.recall /
                   (score.precision + score.recall);
    }
    return score;
}

BleuScore bleu_4(const std::vector<std::string>& candidate,
                 const std::vector<std::vector<std::string>>& references) {
    constexpr std::size_t kMaxOrder = 4;
    BleuScore score;
    if (candidate.empty() || references.empty()) {
        return score;
    }

    // Brevity penalty against the reference length closest to the candidate,
    // shorter reference winning length ties.
    std::size_t candidate_len = candidate.size();
    std::size_t best_ref_len = references.front().size();
    for (const auto& reference : references) {
        std::size_t len = reference.size();
        auto distance = [candidate_len](std::size_t x) {
            return x > candidate_len ? x - candidate_len : candidate_len - x;
        };
        if (distance(len) < distance(best_ref_len) ||
            (distance(len) == distance(best_ref_len) && len < best_ref_len)) {
            best_ref_len = len;
        }
    }
    double brevity = 1.0;
    if (candidate_len <= best_ref_len) {
        brevity = std::exp(1.0 - static_cast<double>(best_ref_len) /
                                     static_cast<double>(candidate_len));
    }

    double log_sum_smoothed = 0.0;
    double log_sum_raw = 0.0;
    bool raw_zero = false;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
        NgramCounts cand_counts = count_ngrams(candidate, n);
        std::size_t total =
            candidate.size() >= n ? candidate.size() - n + 1 : 0;

        // Clip each candidate n-gram count by its maximum count in any single
        // reference ("modified precision").
        NgramCounts ref_max;
        for (const auto& reference : references) {
            NgramCounts ref_counts = count_ngrams(reference, n);
            for (const auto& [gram, count] : ref_counts) {
                std::size_t& slot = ref_max[gram];
                slot = std::max(slot, count);
            }
        }
        std::size_t matched = 0;
        for (const auto& [gram, count] : cand_counts) {
            auto it = ref_max.find(gram);
            if (it != ref_max.end()) {
                matched += std::min(count, it->second);
            }
        }

        if (matched == 0) {
            raw_zero = true;
            double smoothed = static_cast<double>(matched + 1) /
                              static_cast<double>(total + 1);
            log_sum_smoothed += std::log(smoothed);
        } else {
            double precision =
                static_cast<double>(matched) / static_cast<double>(total);
            log_sum_smoothed += std::log(precision);
            log_sum_raw += std::log(precision);
        }
    }

    score.value = brevity * std::exp(log_sum_smoothed / kMaxOrder);
    score.raw = raw_zero ? 0.0 : brevity * std::exp(log_sum_raw / kMaxOrder);
    return score;
}

} // namespace doctorrag
