#pragma once

// Text formats for point clouds, labels and instance bundles.
//
// Doubles are written in shortest round-trip form, so reading a file back
// reproduces every value bit for bit.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catpose/geometry.hpp"
#include "catpose/objective.hpp"
#include "catpose/symmetry.hpp"
#include "catpose/synthgen.hpp"

namespace catpose {

namespace fs = std::filesystem;

std::string format_double(double v);
/// Throws ValidationError unless the whole of `text` is one number.
double parse_double(std::string_view text);

/// One point per line, "x y z", '#' comment lines allowed.
void write_points(const fs::path& path, std::span<const Vec3> points);
/// Throws IoError when the file cannot be read, ValidationError on a
/// malformed line (the message names file and line).
PointCloud read_points(const fs::path& path);

/// One label per line, 1 = inlier.
void write_labels(const fs::path& path, const InlierMask& mask);
InlierMask read_labels(const fs::path& path);

/// Key-value text: "key value..." per line, '#' comments allowed.
using Manifest = std::map<std::string, std::string>;
void write_manifest(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv);
Manifest read_manifest(const fs::path& path);

/// "r00 ... r22 t0 t1 t2 s0 s1 s2" (rotation row-major).
std::string format_pose(const Pose9& pose);
Pose9 parse_pose(std::string_view text);

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

struct BundleInstance {
  std::string id;
  Instance instance;
};

/// Generated data: category profiles plus instances.
struct Bundle {
  std::vector<CategoryProfile> profiles;
  std::vector<BundleInstance> instances;

  /// Throws ValidationError for an unknown category.
  const CategoryProfile& profile(std::string_view category) const;
};

/// Layout:
///   manifest.txt                 format, instance ids in order
///   profiles/<cat>/manifest.txt  symmetry, mean size
///   profiles/<cat>/prior.xyz
///   instances/<id>/manifest.txt  category, seed, pose_gt
///   instances/<id>/{observed,coords}.xyz, labels.txt
void write_bundle(const fs::path& dir, const Bundle& bundle);
Bundle read_bundle(const fs::path& dir);

}  // namespace catpose
