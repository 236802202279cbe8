#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "photoloss/eval.hpp"
#include "photoloss/image.hpp"

namespace photoloss {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes bytes to a temporary file in the target directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

/// Fixed 9-significant-digit representation used for all text output.
std::string format_double(double value);

/// PFM, grayscale variant: header "Pf", float32 scanlines bottom-up,
/// negative scale marks little-endian data.
void write_pfm(const std::filesystem::path& path, const Grid& values);
Grid read_pfm(const std::filesystem::path& path);

/// 8- or 16-bit PNG, grayscale or RGB depending on the image channels.
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);
Image read_png(const std::filesystem::path& path);

/// 16-bit grayscale PNG of values * scale, for depth interchange.
void write_png16_scaled(const std::filesystem::path& path, const Grid& values,
                        double scale);

/// TUM-style trajectory text: "index tx ty tz qx qy qz qw" per line,
/// '#' starts a comment.
void write_trajectory_tum(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_tum(const std::filesystem::path& path);

}  // namespace photoloss
