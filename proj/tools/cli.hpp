#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dfx/feature_table.hpp"
#include "dfx/image.hpp"
#include "dfx/randomizer.hpp"

namespace dfx::cli {

/// `args` excludes the program name. Exit codes: 0 success, 1 runtime error,
/// 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct FixtureOptions {
  std::size_t manipulated = 8;
  std::size_t originals = 8;
  std::size_t untouched = 0;
  std::size_t rows = 48;
  std::size_t cols = 64;
  std::uint64_t seed = 1;
};

struct FixtureSet {
  std::vector<PoolEntry> manipulated;  // includes control_untouched entries
  std::vector<PoolEntry> originals;
  FeatureTable features;
};

/// Writes synthetic scenes under `dir`: images/, masks/, manipulated.csv,
/// originals.csv, images.csv (feature manifest), labels.csv, features.csv.
/// Manifest paths are relative to `dir`.
FixtureSet generate_fixtures(const FixtureOptions& options, const std::filesystem::path& dir);

/// Feature row for one image. Mask-derived fields stay zero without a mask.
ImageRecord compute_features(const ImageId& id, ImageKind kind, const Raster& image,
                             const Mask* mask);

/// Manifest header `image_id,kind,path` with an optional `mask` column; paths
/// are relative to the manifest's directory. The optional labels file has
/// `image_id,subjective_quality,has_person`.
FeatureTable features_from_manifest(const std::filesystem::path& manifest,
                                    const std::optional<std::filesystem::path>& labels);

/// Pool manifest with relative paths resolved against its directory.
std::vector<PoolEntry> read_pool(const std::filesystem::path& manifest, ImageKind default_kind);

}  // namespace dfx::cli
