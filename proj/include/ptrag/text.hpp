#pragma once
// Small text helpers shared by the indexer, the scorers and the diagnostics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ptrag {

/// Counts tokens in a piece of text. All budgets in the engine are expressed
/// in units of whichever counter is configured.
using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Default counter: number of whitespace-delimited words.
std::size_t count_words(std::string_view text);

TokenCounter whitespace_counter();

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string> split_words(std::string_view text);

/// Lowercased alphanumeric word pieces; used by the hash embedder and the
/// overlap reranker.
std::vector<std::string> word_pieces(std::string_view text);

/// Byte range of one sentence inside a larger buffer.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Splits at `.`, `!` or `?` (optionally followed by closing quotes or
/// brackets) when followed by whitespace or end of text. Spans exclude
/// surrounding whitespace.
std::vector<SentenceSpan> sentence_spans(std::string_view text);

/// First `n` sentences of `text`, joined as they appear in the source.
std::string first_sentences(std::string_view text, std::size_t n);

/// Keeps at most `max_tokens` whitespace words.
std::string truncate_words(std::string_view text, std::size_t max_tokens);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a. Used wherever a hash must be identical on every platform.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace ptrag
