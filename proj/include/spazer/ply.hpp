#pragma once

#include "spazer/types.hpp"

#include <string>

namespace spazer {

/// Reads an ASCII or binary-little-endian PLY. Vertices need float-ish
/// x/y/z properties; uchar red/green/blue are optional (default mid-gray).
/// Throws MalformedHeader, MissingProperty, TruncatedBody.
PointCloud load_point_cloud(const std::string& path);

/// Writes the cloud as binary-little-endian PLY with float x/y/z and
/// uchar red/green/blue. Lossless against load_point_cloud.
void save_point_cloud(const PointCloud& cloud, const std::string& path);

}  // namespace spazer
