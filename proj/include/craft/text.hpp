#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace craft {

/// Whitespace tokens of `text` after NFC normalization and lowercasing.
/// No language-specific segmentation; punctuation stays attached.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() with Unicode punctuation removed from every token; tokens that
/// become empty are dropped. Used for statement identity and overlap scoring.
std::vector<std::string> content_tokens(std::string_view text);

/// content_tokens() joined with single spaces.
std::string normalize_text(std::string_view text);

/// Number of sentence terminators ('.', '!', '?' and their full-width forms)
/// that end a sentence: a run of terminators counts once, and a '.' between
/// two digits ("3.5") is a decimal point, not a terminator.
std::size_t count_sentence_terminators(std::string_view text);

/// Digit runs in `text`, with an embedded decimal point or thousands comma kept
/// ("1,200", "3.5"). Trailing punctuation is not part of the numeral.
std::vector<std::string> extract_numerals(std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
bool starts_with(std::string_view s, std::string_view prefix);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Fixed-precision decimal rendering for numbers that end up in prompts,
/// cache keys or golden files.
std::string format_fixed(double v, int precision);

/// Single-quote `s` for a POSIX shell.
std::string shell_quote(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json_file(const std::filesystem::path& path);
std::vector<nlohmann::json> read_jsonl_file(const std::filesystem::path& path);

}  // namespace craft
