#pragma once

// Feature table: comma-delimited text with the header
//   image_id,kind,subjective_quality,has_person,object_count,mask_fraction,delentropy
// An empty subjective_quality field means the image was never rated.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dfx/model.hpp"

namespace dfx {

using FeatureTable = std::map<ImageId, ImageRecord>;

inline constexpr std::string_view kFeatureTableHeader =
    "image_id,kind,subjective_quality,has_person,object_count,mask_fraction,delentropy";

FeatureTable parse_feature_table(std::string_view text, std::string_view source = "<memory>");
FeatureTable read_feature_table(const std::filesystem::path& path);
std::string format_feature_table(const FeatureTable& table);
void write_feature_table(const std::filesystem::path& path, const FeatureTable& table);

}  // namespace dfx
