#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "famix/core/types.hpp"

namespace famix {

/// 8-bit RGB image, row-major H x W x 3.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Binary netpbm I/O: P6 for images, P5 for 8-bit label maps.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
LabelMap read_label_pgm(const std::filesystem::path& path, int num_classes,
                        int ignore_index = kDefaultIgnoreIndex);
void write_label_pgm(const LabelMap& labels, const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path label;
  std::string split;
};

/// Whitespace-separated "image label split" lines; '#' starts a comment. Relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

struct Sample {
  RgbImage image;
  LabelMap labels;
};

/// Loads every manifest entry of `split` (all entries when split is empty).
std::vector<Sample> load_split(const std::filesystem::path& manifest, const std::string& split,
                               int num_classes, int ignore_index = kDefaultIgnoreIndex);

}  // namespace famix
