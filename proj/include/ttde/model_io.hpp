#pragma once

#include "ttde/density.hpp"

#include <string>

namespace ttde {

/// Self-describing JSON document:
/// {"format": "ttde-model", "version": 1, "d", "variant",
///  "bases": [{"degree", "size", "lower", "upper"}...],
///  "cores": [[[...r_right] ...m] ...r_left] per core, "normalization"}.
/// Doubles are written in shortest round-trip form, so load(save(m)) is
/// bit-identical.
std::string model_to_json(const DensityModel& model);
DensityModel model_from_json(const std::string& text);

void save_model(const std::string& path, const DensityModel& model);
DensityModel load_model(const std::string& path);

}  // namespace ttde
