#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Section layout shared by the prompt builders and the rule-based mock
// backends. Bump kPromptVersion whenever any wording below changes; it is
// part of every cached prompt fingerprint.

namespace craft::prompt {

inline constexpr std::string_view kPromptVersion = "craft-prompts/1";

inline constexpr std::string_view kPersonaTitle = "### PERSONA TITLE";
inline constexpr std::string_view kPersonaBackground = "### PERSONA BACKGROUND";
inline constexpr std::string_view kQuery = "### QUERY";
inline constexpr std::string_view kVideo = "### VIDEO";
inline constexpr std::string_view kTranscriptOriginal = "### TRANSCRIPT (original)";
inline constexpr std::string_view kTranscriptEnglish = "### TRANSCRIPT (English translation)";
inline constexpr std::string_view kPreviousClaims = "### PREVIOUS CLAIMS";
inline constexpr std::string_view kCriticReport = "### CRITIC REPORT";
inline constexpr std::string_view kOutputFormat = "### OUTPUT FORMAT";
inline constexpr std::string_view kSampleClaims = "### SAMPLE CLAIMS";
inline constexpr std::string_view kClaimPacket = "### CLAIM PACKET";
inline constexpr std::string_view kGuardViolations = "### GUARD VIOLATIONS";
inline constexpr std::string_view kClaimA = "### CLAIM A";
inline constexpr std::string_view kClaimB = "### CLAIM B";
inline constexpr std::string_view kContradictionProbability = "### CONTRADICTION PROBABILITY";

inline constexpr std::string_view kNoTranscript = "(no transcript available)";
inline constexpr std::string_view kSameAsOriginal = "(original transcript is English)";

// Critic feedback line prefixes.
inline constexpr std::string_view kRemove = "REMOVE: ";
inline constexpr std::string_view kWeak = "WEAK ";
inline constexpr std::string_view kContradiction = "CONTRADICTION: ";
inline constexpr std::string_view kRejected = "REJECTED ";
inline constexpr std::string_view kPairSeparator = " || ";
inline constexpr std::string_view kHintMarker = " HINT: ";

/// Lines of the section headed `header` (up to the next "### " line), or
/// nullopt when the header is absent.
std::optional<std::vector<std::string>> section(std::string_view document, std::string_view header);

}  // namespace craft::prompt
