#include "craft/prompt_format.hpp"

#include "craft/text.hpp"

namespace craft::prompt {

std::optional<std::vector<std::string>> section(std::string_view document, std::string_view header) {
  const auto lines = split_lines(document);
  std::optional<std::vector<std::string>> out;
  for (const auto& line : lines) {
    if (out) {
      if (starts_with(line, "### ")) break;
      out->push_back(line);
    } else if (starts_with(line, header)) {
      out.emplace();
    }
  }
  if (out) {
    while (!out->empty() && trim(out->back()).empty()) out->pop_back();
  }
  return out;
}

}  // namespace craft::prompt
