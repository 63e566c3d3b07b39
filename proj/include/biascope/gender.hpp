#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace biascope {

enum class Gender { kFemale, kMale, kUnassigned };

// "F" / "M" / "unassigned".
std::string_view to_string(Gender g) noexcept;

// Accepts F/M/female/male (any case); anything else is nullopt.
std::optional<Gender> parse_gender_tag(std::string_view text);

inline Gender opposite(Gender g) noexcept {
  switch (g) {
    case Gender::kFemale:
      return Gender::kMale;
    case Gender::kMale:
      return Gender::kFemale;
    default:
      return g;
  }
}

}  // namespace biascope
