#pragma once

#include <string>

#include "gibly/training.hpp"

namespace gibly {

// JSON scene description:
//   {"seed": 7, "primitives": [{"kind": "cylinder", "label": 0,
//    "count": 1000, "center": [0,0,0], "angles": [0,0,0], "radius": 0.5,
//    "height": 2.0, "extents": [1,1,1], "surface": true,
//    "noise_sigma": 0.01}, ...]}
// Unknown keys are rejected. Throws std::invalid_argument on a bad spec.
SyntheticSceneSpec parse_scene_spec_json(const std::string& text);
SyntheticSceneSpec load_scene_spec(const std::string& path);

}  // namespace gibly
