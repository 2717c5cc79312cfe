#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "calfront/grid.hpp"

namespace calfront {

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Grid<Rgb>;

// Real-valued rasters use the portable float map format (single channel, little endian).
void write_pfm(const std::filesystem::path& path, const Grid<double>& raster);
Grid<double> read_pfm(const std::filesystem::path& path);

// Label, mask and figure rasters are 8-bit PNG.
void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& raster);
Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png_rgb(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace calfront
