#pragma once

// nlohmann-facing serializers shared between the .cpp files; the public API
// trades in strings/files so vendor headers stay out of installed headers.

#include <json.hpp>

#include "trafficsynth/netcore.hpp"

namespace trafficsynth::detail {

nlohmann::ordered_json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

}  // namespace trafficsynth::detail
