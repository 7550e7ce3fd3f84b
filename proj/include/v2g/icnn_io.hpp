#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "v2g/icnn.hpp"

namespace v2g {

// Weight files are single JSON documents:
//   {"kind": "picnn", "arch": {...}, "scaling": {...}, "layers": [{"W_z": [[..]], ...}]}
// Matrices are nested row arrays; their shapes are implied by "arch" and
// checked on load. Doubles are written with 17 significant digits, so a
// save/load cycle is lossless.

nlohmann::json to_json(const PicnnWeights& w);
nlohmann::json to_json(const FicnnWeights& w);
PicnnWeights picnn_from_json(const nlohmann::json& j);
FicnnWeights ficnn_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PicnnArch& a);
PicnnArch picnn_arch_from_json(const nlohmann::json& j);

void save_weights(const PicnnWeights& w, const std::filesystem::path& path);
PicnnWeights load_picnn(const std::filesystem::path& path);

}  // namespace v2g
