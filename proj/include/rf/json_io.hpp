#pragma once

#include "json.hpp"
#include "rf/field.hpp"

namespace rf {

nlohmann::json beam_shape_to_json(const BeamShape& shape);
BeamShape beam_shape_from_json(const nlohmann::json& j);

/// {direction, tube_distance, beam_shape, tube_spectrum}
nlohmann::json beam_to_json(const BeamParams& beam);
BeamParams beam_from_json(const nlohmann::json& j);

}  // namespace rf
