#pragma once

#include <string>

#include "cslab/model.hpp"

namespace cslab {

// Weight file layout: magic "CSLB", one version byte (1), a 32-bit
// little-endian length followed by that many bytes of UTF-8 JSON
// describing the architecture, then all parameters as little-endian
// f32 in layer order (w then b per parameterized layer).

void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

}  // namespace cslab
