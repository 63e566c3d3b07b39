#pragma once

#include <string_view>

namespace biascope::bundled {

// data/gender_pairs.csv, embedded at build time.
extern const std::string_view kGenderPairsCsv;

}  // namespace biascope::bundled
