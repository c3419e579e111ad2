// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <cctype>
#include <string>

#include "wsibench/error.hpp"

namespace wsibench {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {
  if (w < 0 || h < 0) fail(ErrorKind::InvalidConfig, "image dimensions must be non-negative");
}

Image Image::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width || y0 + h > height)
    fail(ErrorKind::DimensionMismatch, "crop window outside the image");
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* src = &pixels[(static_cast<std::size_t>(y0 + y) * width + x0) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.pixels[static_cast<std::size_t>(y) * w * 3]);
  }
  return out;
}

std::vector<Patch> tile(const Image& slide, int patch_size, const std::string& slide_id) {
  if (patch_size < 1) fail(ErrorKind::InvalidConfig, "patch size must be positive");
  if (slide.width < patch_size || slide.height < patch_size)
    fail(ErrorKind::SlideTooSmall, "slide " + std::to_string(slide.width) + "x" + std::to_string(slide.height) +
                                       " is smaller than one " + std::to_string(patch_size) + "px patch");
  const int rows = slide.height / patch_size;
  const int cols = slide.width / patch_size;
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.push_back({slide.crop(c * patch_size, r * patch_size, patch_size, patch_size), slide_id, {r, c}});
  return out;
}

Image untile(const std::vector<Patch>& patches, int rows, int cols) {
  if (rows < 1 || cols < 1 || patches.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    fail(ErrorKind::DimensionMismatch, "patch count does not match the grid");
  const int pw = patches.front().pixels.width;
  const int ph = patches.front().pixels.height;
  Image out(pw * cols, ph * rows);
  for (const auto& p : patches) {
    if (p.pixels.width != pw || p.pixels.height != ph || p.grid_pos.row >= rows || p.grid_pos.col >= cols ||
        p.grid_pos.row < 0 || p.grid_pos.col < 0)
      fail(ErrorKind::DimensionMismatch, "patch does not fit the grid");
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        for (int ch = 0; ch < 3; ++ch)
          out.at(p.grid_pos.col * pw + x, p.grid_pos.row * ph + y, ch) = p.pixels.at(x, y, ch);
  }
  return out;
}

namespace {

bool has_extension(const std::filesystem::path& path, const char* ext) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ext;
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v)) fail(ErrorKind::Io, "malformed PPM header");
  return v;
}


}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") fail(ErrorKind::Io, path.string() + " is not a binary PPM (P6)");
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w < 1 || h < 1 || maxval != 255) fail(ErrorKind::Io, path.string() + ": only 8-bit PPMs are supported");
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) fail(ErrorKind::Io, path.string() + " is truncated");
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    fail(ErrorKind::Io, "cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorKind::Io, "cannot decode PNG " + path.string() + ": " + msg);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
    fail(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + png.message);
}

Image read_image(const std::filesystem::path& path) {
  if (has_extension(path, ".png")) return read_png(path);
  if (has_extension(path, ".ppm")) return read_ppm(path);
  fail(ErrorKind::Io, "unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (has_extension(path, ".png")) return write_png(path, img);
  if (has_extension(path, ".ppm")) return write_ppm(path, img);
  fail(ErrorKind::Io, "unsupported image format: " + path.string());
}

}  // namespace wsibench
