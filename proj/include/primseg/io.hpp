#pragma once

#include "primseg/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace primseg::io {

/// `x y z` or `x y z nx ny nz` per line; `#` lines and blank lines skipped.
Cloud read_xyz(const std::filesystem::path& path);
std::string format_xyz(const Cloud& cloud);

/// ASCII PLY with float/double vertex properties x y z and optional nx ny nz.
Cloud read_ply(const std::filesystem::path& path);

/// Dispatches on extension (.ply, otherwise XYZ).
Cloud read_cloud(const std::filesystem::path& path);

std::vector<int> read_labels(const std::filesystem::path& path);
std::string format_labels(const std::vector<int>& labels);

/// `n` header then the packed lower triangle, one row per line.
std::string format_lower_triangle(const Eigen::MatrixXd& a);
Eigen::MatrixXd parse_lower_triangle(const std::string& text);

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over the target on success.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace primseg::io
