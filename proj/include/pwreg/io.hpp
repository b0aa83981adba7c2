#pragma once

#include <string>

#include "pwreg/types.hpp"

namespace pwreg {

enum class CloudFormat { xyz_text, csv, ply_ascii };

/// Picks a format from the file extension: .csv -> csv, .ply -> ply_ascii,
/// anything else -> xyz_text.
CloudFormat format_from_extension(const std::string& path);

/// Reads a point cloud. Parse failures report the 1-based line number;
/// an empty file raises "no points"; rows with inconsistent dimension raise.
PointCloud load_cloud(const std::string& path, CloudFormat format);
inline PointCloud load_cloud(const std::string& path) {
  return load_cloud(path, format_from_extension(path));
}

/// Writes a cloud in the named format with round-trip-exact float formatting.
void save_cloud(const std::string& path, const PointCloud& cloud, CloudFormat format);
inline void save_cloud(const std::string& path, const PointCloud& cloud) {
  save_cloud(path, cloud, format_from_extension(path));
}

}  // namespace pwreg
