#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flam/modelsel.hpp"

namespace flam::io {

inline constexpr int kFormatVersion = 1;

// A saved file holds one model per fitted lambda. Extra keys are ignored on
// load; a missing key or another format_version throws DataError.
struct ModelFile {
    std::vector<FlamModel> models;
};

std::string to_json(const ModelFile& file);
ModelFile from_json(const std::string& text);

void save(const std::string& path, const ModelFile& file);
ModelFile load(const std::string& path);

}  // namespace flam::io
