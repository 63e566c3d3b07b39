#include "biascope/gender.hpp"

#include "biascope/jsonl.hpp"

namespace biascope {

std::string_view to_string(Gender g) noexcept {
  switch (g) {
    case Gender::kFemale:
      return "F";
    case Gender::kMale:
      return "M";
    default:
      return "unassigned";
  }
}

std::optional<Gender> parse_gender_tag(std::string_view text) {
  const std::string lower = ascii_lower(text);
  if (lower == "f" || lower == "female") {
    return Gender::kFemale;
  }
  if (lower == "m" || lower == "male") {
    return Gender::kMale;
  }
  return std::nullopt;
}

}  // namespace biascope
