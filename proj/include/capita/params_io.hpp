#pragma once

#include <string>
#include <string_view>

#include "capita/calibration.hpp"

namespace capita {

/// JSON rendering of a calibration, including its segmentation snapshot.
std::string params_to_json(const CapitationParams& params);
/// Inverse of params_to_json. Throws ConfigError on malformed input.
CapitationParams params_from_json(std::string_view text);

}  // namespace capita
