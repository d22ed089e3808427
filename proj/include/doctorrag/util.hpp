#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace doctorrag {

// 64-bit FNV-1a. Used for content digests and deterministic mock fallbacks;
// stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 14695981039346656037ULL);

// SplitMix64 scrambler, used to expand a digest into a value stream.
std::uint64_t splitmix64(std::uint64_t x);

// Lower-case 16-digit hex rendering of a 64-bit value.
std::string hex64(std::uint64_t value);

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

// Trim plus ASCII case folding; the normalization used for label matching.
std::string normalize_label(std::string_view text);

// Token estimate for text whose backend reports no usage: ceil(characters / 4).
std::uint64_t estimate_tokens(std::string_view text);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

// Writes via a temporary file in the same directory plus rename, so readers
// never observe a partially written artifact.
void write_file_atomic(const std::string& path, std::string_view content);

// Runs fn(i) for i in [0, count) on up to `concurrency` workers. fn must not
// throw: workers run detached from the caller's stack, so callers catch inside
// fn and store the outcome into an index-addressed slot.
void for_each_index(std::size_t count, int concurrency,
                    const std::function<void(std::size_t)>& fn);

} // namespace doctorrag
