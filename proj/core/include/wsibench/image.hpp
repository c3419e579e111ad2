// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsibench {

// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const Image&) const = default;

  Image crop(int x0, int y0, int w, int h) const;
};

struct GridPos {
  int row = 0;
  int col = 0;
  auto operator<=>(const GridPos&) const = default;
};

struct Patch {
  Image pixels;
  std::string slide_id;
  GridPos grid_pos;
};

// Non-overlapping P x P patches in row-major order; the right and bottom
// remainders are dropped.
std::vector<Patch> tile(const Image& slide, int patch_size, const std::string& slide_id = "");

// Reassembles a full grid of equally sized patches.
Image untile(const std::vector<Patch>& patches, int rows, int cols);

// Format chosen by extension: .png (libpng) or .ppm (binary P6).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace wsibench
