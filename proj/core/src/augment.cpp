// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "wsibench/error.hpp"
#include "wsibench/rng.hpp"

namespace wsibench {

const std::array<AugKind, kAugmentationCount> kAllAugmentations = {
    AugKind::MacenkoPatch,   AugKind::Rotate90,      AugKind::Rotate180,     AugKind::Rotate270,
    AugKind::RandomRotation, AugKind::FlipH,         AugKind::FlipV,         AugKind::Zoom1_5,
    AugKind::Zoom1_75,       AugKind::Zoom2,         AugKind::Affine,        AugKind::WarpPerspective,
    AugKind::Jigsaw,         AugKind::Cutout,        AugKind::AugMix,        AugKind::BrightnessLow,
    AugKind::BrightnessHigh, AugKind::ContrastLow,   AugKind::ContrastHigh,  AugKind::SaturationLow,
    AugKind::SaturationHigh, AugKind::ColourJitter,  AugKind::Gamma0_5,      AugKind::Gamma2_0,
    AugKind::Sharpen,        AugKind::GaussianBlur,  AugKind::MedianBlur,
};

const std::array<AugKind, 5> kRotateFlipAugmentations = {AugKind::FlipH, AugKind::FlipV, AugKind::Rotate90,
                                                         AugKind::Rotate180, AugKind::Rotate270};

namespace {

constexpr std::array<std::string_view, kAugmentationCount> kNames = {
    "macenko_patch",   "rotate90",        "rotate180",     "rotate270",      "random_rotation", "flip_h",
    "flip_v",          "zoom1.5",         "zoom1.75",      "zoom2",          "affine",          "warp_perspective",
    "jigsaw",          "cutout",          "augmix",        "brightness_low", "brightness_high", "contrast_low",
    "contrast_high",   "saturation_low",  "saturation_high", "colour_jitter", "gamma0.5",       "gamma2.0",
    "sharpen",         "gaussian_blur",   "median_blur",
};

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0)); }

enum class Border { Black, Reflect };

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Bilinear sample at continuous coordinates where pixel (i, j) has its
// centre at (i + 0.5, j + 0.5).
void sample(const Image& img, double sx, double sy, Border border, double out[3]) {
  const double fx = sx - 0.5, fy = sy - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double ax = fx - x0f, ay = fy - y0f;
  const int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  out[0] = out[1] = out[2] = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    const double wy = dy ? ay : 1.0 - ay;
    if (wy == 0.0) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const double wx = dx ? ax : 1.0 - ax;
      if (wx == 0.0) continue;
      int x = x0 + dx, y = y0 + dy;
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) {
        if (border == Border::Black) continue;
        x = reflect_index(x, img.width);
        y = reflect_index(y, img.height);
      }
      for (int c = 0; c < 3; ++c) out[c] += wx * wy * img.at(x, y, c);
    }
  }
}

// Inverse warp: `map(dst_x, dst_y)` returns the source coordinates.
template <class Map>
Image warp(const Image& img, Border border, Map&& map) {
  Image out(img.width, img.height);
  double px[3];
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto [sx, sy] = map(x + 0.5, y + 0.5);
      sample(img, sx, sy, border, px);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(px[c]);
    }
  return out;
}

Image warp_affine(const Image& img, const Eigen::Matrix3d& forward, Border border) {
  const Eigen::Matrix3d inv = forward.inverse();
  return warp(img, border, [&](double x, double y) {
    const Eigen::Vector3d s = inv * Eigen::Vector3d(x, y, 1.0);
    return std::pair{s(0), s(1)};
  });
}

Eigen::Matrix3d translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

// Counter-clockwise on screen (y axis pointing down).
Eigen::Matrix3d rotation(double degrees) {
  const double c = std::cos(degrees * kDeg), s = std::sin(degrees * kDeg);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = c;
  m(0, 1) = s;
  m(1, 0) = -s;
  m(1, 1) = c;
  return m;
}

Eigen::Matrix3d about_centre(const Image& img, const Eigen::Matrix3d& m) {
  const double cx = img.width / 2.0, cy = img.height / 2.0;
  return translation(cx, cy) * m * translation(-cx, -cy);
}

template <class F>
Image per_value(const Image& img, F&& f) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = f(img.pixels[i]);
  return out;
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Per-channel blend towards `other` with weight (1 - factor).
Image blend(const Image& img, const std::vector<double>& other, double factor) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = to_u8(factor * img.pixels[i] + (1.0 - factor) * other[i]);
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d + 6.0, 6.0) / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int i = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

Image auto_contrast(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    int lo = 255, hi = 0;
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3) {
      lo = std::min<int>(lo, img.pixels[i]);
      hi = std::max<int>(hi, img.pixels[i]);
    }
    if (hi <= lo) continue;
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3)
      out.pixels[i] = to_u8((img.pixels[i] - lo) * scale);
  }
  return out;
}

// Histogram equalisation per channel, using the cumulative-step lookup of
// the common imaging libraries.
Image equalize(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    std::array<long, 256> hist{};
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3) ++hist[img.pixels[i]];
    long total = 0, last = 0;
    for (int v = 0; v < 256; ++v)
      if (hist[static_cast<std::size_t>(v)]) last = hist[static_cast<std::size_t>(v)], total += last;
    const long step = (total - last) / 255;
    if (step == 0) continue;
    std::array<std::uint8_t, 256> lut{};
    long n = step / 2;
    for (int v = 0; v < 256; ++v) {
      lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(std::min<long>(255, n / step));
      n += hist[static_cast<std::size_t>(v)];
    }
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3) out.pixels[i] = lut[img.pixels[i]];
  }
  return out;
}

Image apply_augmix_step(const Image& img, const AugMixStep& s) {
  switch (s.op) {
    case AugMixOp::AutoContrast: return auto_contrast(img);
    case AugMixOp::Equalize: return equalize(img);
    case AugMixOp::Posterize: {
      const auto mask = static_cast<std::uint8_t>(0xFF << (8 - static_cast<int>(s.value)));
      return per_value(img, [&](std::uint8_t v) { return static_cast<std::uint8_t>(v & mask); });
    }
    case AugMixOp::Solarize:
      return per_value(img, [&](std::uint8_t v) { return v < s.value ? v : static_cast<std::uint8_t>(255 - v); });
    case AugMixOp::Rotate: return aug::rotate(img, s.value);
    case AugMixOp::ShearX: {
      Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
      m(0, 1) = s.value;
      return warp_affine(img, about_centre(img, m), Border::Black);
    }
    case AugMixOp::ShearY: {
      Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
      m(1, 0) = s.value;
      return warp_affine(img, about_centre(img, m), Border::Black);
    }
    case AugMixOp::TranslateX: return warp_affine(img, translation(s.value, 0.0), Border::Black);
    case AugMixOp::TranslateY: return warp_affine(img, translation(0.0, s.value), Border::Black);
  }
  return img;
}

}  // namespace

std::string_view to_string(AugKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

AugKind parse_aug_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<AugKind>(i);
  fail(ErrorKind::InvalidConfig, "unknown augmentation '" + std::string(name) + "'");
}

bool is_stochastic(AugKind kind) {
  switch (kind) {
    case AugKind::RandomRotation:
    case AugKind::Affine:
    case AugKind::WarpPerspective:
    case AugKind::Jigsaw:
    case AugKind::Cutout:
    case AugKind::AugMix:
    case AugKind::ColourJitter: return true;
    default: return false;
  }
}

// ---------------------------------------------------------------------------

namespace aug {

Image rotate90(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, img.width - 1 - x, c) = img.at(x, y, c);
  return out;
}

Image rotate180(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image rotate270(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.height - 1 - y, x, c) = img.at(x, y, c);
  return out;
}

Image flip_h(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

Image flip_v(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image rotate(const Image& img, double degrees) {
  return warp_affine(img, about_centre(img, rotation(degrees)), Border::Black);
}

Image zoom(const Image& img, double factor) {
  if (!(factor > 0.0)) fail(ErrorKind::InvalidConfig, "zoom factor must be positive");
  const double cx = img.width / 2.0, cy = img.height / 2.0;
  return warp(img, Border::Reflect,
              [&](double x, double y) { return std::pair{cx + (x - cx) / factor, cy + (y - cy) / factor}; });
}

Image affine(const Image& img, const AffineParams& p) {
  Eigen::Matrix3d shear = Eigen::Matrix3d::Identity();
  shear(0, 1) = std::tan(p.shear_degrees * kDeg);
  Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
  scale(0, 0) = scale(1, 1) = p.scale;
  const Eigen::Matrix3d m =
      translation(p.translate_x, p.translate_y) * about_centre(img, rotation(p.rotation_degrees) * shear * scale);
  return warp_affine(img, m, Border::Black);
}

Image perspective(const Image& img, const PerspectiveParams& p) {
  const double w = img.width, h = img.height;
  const std::array<std::array<double, 2>, 4> src = {{{0.0, 0.0}, {w, 0.0}, {w, h}, {0.0, h}}};
  // Homography taking destination corners back to the source corners.
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int k = 0; k < 4; ++k) {
    const double x = p.corners[static_cast<std::size_t>(k)][0], y = p.corners[static_cast<std::size_t>(k)][1];
    const double u = src[static_cast<std::size_t>(k)][0], v = src[static_cast<std::size_t>(k)][1];
    a.row(2 * k) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * k + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * k) = u;
    b(2 * k + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> hv = a.fullPivLu().solve(b);
  return warp(img, Border::Black, [&](double x, double y) {
    const double d = hv(6) * x + hv(7) * y + 1.0;
    return std::pair{(hv(0) * x + hv(1) * y + hv(2)) / d, (hv(3) * x + hv(4) * y + hv(5)) / d};
  });
}

Image jigsaw(const Image& img, const JigsawParams& p) {
  Image out = img;
  const int tw = img.width / 4, th = img.height / 4;
  for (int dst = 0; dst < 16; ++dst) {
    const int src = p.permutation[static_cast<std::size_t>(dst)];
    const int dx0 = (dst % 4) * tw, dy0 = (dst / 4) * th, sx0 = (src % 4) * tw, sy0 = (src / 4) * th;
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x)
        for (int c = 0; c < 3; ++c) out.at(dx0 + x, dy0 + y, c) = img.at(sx0 + x, sy0 + y, c);
  }
  return out;
}

Image cutout(const Image& img, const CutoutParams& p) {
  Image out = img;
  for (int y = p.y; y < p.y + p.height; ++y)
    for (int x = p.x; x < p.x + p.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = 0;
  return out;
}

Image brightness(const Image& img, double factor) {
  return per_value(img, [&](std::uint8_t v) { return to_u8(v * factor); });
}

Image contrast(const Image& img, double factor) {
  double mean = 0.0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    mean += luma(img.pixels[i * 3], img.pixels[i * 3 + 1], img.pixels[i * 3 + 2]);
  mean /= static_cast<double>(std::max<std::size_t>(1, img.pixel_count()));
  return per_value(img, [&](std::uint8_t v) { return to_u8(factor * v + (1.0 - factor) * mean); });
}

Image saturation(const Image& img, double factor) {
  std::vector<double> gray(img.pixels.size());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double g = luma(img.pixels[i * 3], img.pixels[i * 3 + 1], img.pixels[i * 3 + 2]);
    gray[i * 3] = gray[i * 3 + 1] = gray[i * 3 + 2] = g;
  }
  return blend(img, gray, factor);
}

Image hue(const Image& img, double shift) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    double h, s, v, r, g, b;
    rgb_to_hsv(img.pixels[i * 3] / 255.0, img.pixels[i * 3 + 1] / 255.0, img.pixels[i * 3 + 2] / 255.0, h, s, v);
    h = h + shift;
    h -= std::floor(h);
    hsv_to_rgb(h, s, v, r, g, b);
    out.pixels[i * 3] = to_u8(r * 255.0);
    out.pixels[i * 3 + 1] = to_u8(g * 255.0);
    out.pixels[i * 3 + 2] = to_u8(b * 255.0);
  }
  return out;
}

Image colour_jitter(const Image& img, const ColourJitterParams& p) {
  return hue(saturation(contrast(brightness(img, p.brightness), p.contrast), p.saturation), p.hue);
}

Image gamma(const Image& img, double exponent) {
  return per_value(img, [&](std::uint8_t v) { return to_u8(255.0 * std::pow(v / 255.0, exponent)); });
}

Image sharpen(const Image& img, double factor) {
  std::vector<double> smooth(img.pixels.begin(), img.pixels.end());
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 4.0 * img.at(x, y, c);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) s += img.at(x + dx, y + dy, c);
        smooth[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = std::nearbyint(s / 13.0);
      }
  return blend(img, smooth, factor);
}

Image gaussian_blur(const Image& img, int kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0 || !(sigma > 0.0)) fail(ErrorKind::InvalidConfig, "bad blur kernel");
  const int r = kernel / 2;
  std::vector<double> w(static_cast<std::size_t>(kernel));
  double total = 0.0;
  for (int k = -r; k <= r; ++k) total += w[static_cast<std::size_t>(k + r)] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (auto& v : w) v /= total;
  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) s += w[static_cast<std::size_t>(k + r)] * img.at(reflect_index(x + k, img.width), y, c);
        tmp[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = s;
      }
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k)
          s += w[static_cast<std::size_t>(k + r)] *
               tmp[(static_cast<std::size_t>(reflect_index(y + k, img.height)) * img.width + x) * 3 + c];
        out.at(x, y, c) = to_u8(s);
      }
  return out;
}

Image median_blur(const Image& img, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) fail(ErrorKind::InvalidConfig, "bad median kernel");
  const int r = kernel / 2;
  Image out(img.width, img.height);
  std::vector<std::uint8_t> window(static_cast<std::size_t>(kernel * kernel));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        std::size_t k = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            window[k++] = img.at(reflect_index(x + dx, img.width), reflect_index(y + dy, img.height), c);
        std::nth_element(window.begin(), window.begin() + static_cast<long>(window.size() / 2), window.end());
        out.at(x, y, c) = window[window.size() / 2];
      }
  return out;
}

Image augmix(const Image& img, const AugMixParams& p) {
  std::vector<double> mixed(img.pixels.size(), 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    Image chain = img;
    for (const auto& step : p.chains[k]) chain = apply_augmix_step(chain, step);
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += p.weights[k] * chain.pixels[i];
  }
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < mixed.size(); ++i) out.pixels[i] = to_u8((1.0 - p.mix) * img.pixels[i] + p.mix * mixed[i]);
  return out;
}

}  // namespace aug

// ---------------------------------------------------------------------------
// Parameter sampling and validation

namespace {

constexpr double kAugMixSeverity = 3.0;

double augmix_level(Rng& rng) { return rng.uniform(0.1, kAugMixSeverity); }
double signed_value(Rng& rng, double v) { return rng.below(2) ? -v : v; }

AugMixStep sample_augmix_step(Rng& rng, int width, int height) {
  AugMixStep s;
  s.op = static_cast<AugMixOp>(rng.below(9));
  const double level = augmix_level(rng);
  switch (s.op) {
    case AugMixOp::AutoContrast:
    case AugMixOp::Equalize: break;
    case AugMixOp::Posterize: s.value = 4.0 - std::floor(level * 4.0 / 10.0); break;
    case AugMixOp::Solarize: s.value = 256.0 - std::floor(level * 256.0 / 10.0); break;
    case AugMixOp::Rotate: s.value = signed_value(rng, std::floor(level * 30.0 / 10.0)); break;
    case AugMixOp::ShearX:
    case AugMixOp::ShearY: s.value = signed_value(rng, level * 0.3 / 10.0); break;
    case AugMixOp::TranslateX: s.value = signed_value(rng, std::floor(level * (width / 3.0) / 10.0)); break;
    case AugMixOp::TranslateY: s.value = signed_value(rng, std::floor(level * (height / 3.0) / 10.0)); break;
  }
  return s;
}

void require(bool ok, AugKind kind, const char* what) {
  if (!ok) fail(ErrorKind::InvalidConfig, std::string(to_string(kind)) + ": " + what);
}

template <class T>
const T& params_as(const AugmentationSpec& s) {
  const T* p = std::get_if<T>(&s.params);
  require(p != nullptr, s.kind, "parameter record does not match the kind");
  return *p;
}

}  // namespace

AugmentationSpec make_spec(AugKind kind, std::uint64_t rng_seed, int width, int height,
                           const std::optional<StainProfile>& reference) {
  AugmentationSpec spec{kind, rng_seed, width, height, false, NoParams{}};
  Rng rng = Rng(rng_seed).child(to_string(kind));
  switch (kind) {
    case AugKind::MacenkoPatch:
      require(reference.has_value(), kind, "a reference stain profile is required");
      spec.params = MacenkoParams{*reference, {}};
      break;
    case AugKind::RandomRotation:
      spec.params = RotationParams{90.0 * static_cast<double>(rng.below(4)) + rng.uniform(10.0, 80.0)};
      break;
    case AugKind::Affine:
      spec.params = AffineParams{rng.uniform(-10.0, 10.0), rng.uniform(-0.2, 0.2) * width,
                                 rng.uniform(-0.2, 0.2) * height, rng.uniform(0.8, 1.2), rng.uniform(-10.0, 10.0)};
      break;
    case AugKind::WarpPerspective: {
      const double dx = 0.2 * width / 2.0, dy = 0.2 * height / 2.0;
      PerspectiveParams p;
      p.corners[0] = {rng.uniform(0.0, dx), rng.uniform(0.0, dy)};
      p.corners[1] = {width - rng.uniform(0.0, dx), rng.uniform(0.0, dy)};
      p.corners[2] = {width - rng.uniform(0.0, dx), height - rng.uniform(0.0, dy)};
      p.corners[3] = {rng.uniform(0.0, dx), height - rng.uniform(0.0, dy)};
      spec.params = p;
      break;
    }
    case AugKind::Jigsaw: {
      JigsawParams p;
      std::iota(p.permutation.begin(), p.permutation.end(), 0);
      rng.shuffle(std::span<int>(p.permutation));
      spec.params = p;
      break;
    }
    case AugKind::Cutout: {
      const double total = static_cast<double>(width) * height;
      bool found = false;
      CutoutParams p;
      for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        const double area = rng.uniform(0.02, 0.25) * total;
        const double ratio = std::exp(rng.uniform(std::log(0.3), std::log(1.0 / 0.3)));
        const int w = static_cast<int>(std::lround(std::sqrt(area * ratio)));
        const int h = static_cast<int>(std::lround(std::sqrt(area / ratio)));
        const double frac = static_cast<double>(w) * h / total;
        if (w < 1 || h < 1 || w > width || h > height || frac < 0.02 || frac > 0.25) continue;
        p = {static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1))),
             static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1))), w, h};
        found = true;
      }
      require(found, kind, "no rectangle with 2-25% area fits the patch");
      spec.params = p;
      break;
    }
    case AugKind::ColourJitter:
      spec.params = ColourJitterParams{rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4),
                                       rng.uniform(-0.1, 0.1)};
      break;
    case AugKind::AugMix: {
      AugMixParams p;
      for (auto& chain : p.chains) {
        const auto depth = 1 + rng.below(3);
        for (std::uint64_t d = 0; d < depth; ++d) chain.push_back(sample_augmix_step(rng, width, height));
      }
      double sum = 0.0;
      for (auto& w : p.weights) sum += w = rng.gamma(1.0);
      for (auto& w : p.weights) w /= sum;
      const double g1 = rng.gamma(1.0), g2 = rng.gamma(1.0);
      p.mix = g1 / (g1 + g2);
      spec.params = p;
      break;
    }
    default: break;
  }
  validate(spec);
  return spec;
}

void validate(const AugmentationSpec& s) {
  const AugKind k = s.kind;
  require(static_cast<std::size_t>(k) < kAugmentationCount, k, "unknown kind");
  require(s.width >= 1 && s.height >= 1, k, "patch dimensions must be positive");
  switch (k) {
    case AugKind::MacenkoPatch: params_as<MacenkoParams>(s); break;
    case AugKind::RandomRotation: {
      const double m = std::fmod(params_as<RotationParams>(s).degrees, 90.0);
      require(m >= 10.0 && m <= 80.0, k, "angle mod 90 must lie in [10, 80]");
      break;
    }
    case AugKind::Affine: {
      const auto& p = params_as<AffineParams>(s);
      require(std::abs(p.rotation_degrees) <= 10.0, k, "rotation exceeds 10 degrees");
      require(std::abs(p.translate_x) <= 0.2 * s.width && std::abs(p.translate_y) <= 0.2 * s.height, k,
              "translation exceeds 20%");
      require(p.scale >= 0.8 && p.scale <= 1.2, k, "scale outside [0.8, 1.2]");
      require(std::abs(p.shear_degrees) <= 10.0, k, "shear exceeds 10 degrees");
      break;
    }
    case AugKind::WarpPerspective: {
      const auto& p = params_as<PerspectiveParams>(s);
      const double dx = 0.2 * s.width / 2.0, dy = 0.2 * s.height / 2.0;
      const double ox[4] = {0.0, 1.0 * s.width, 1.0 * s.width, 0.0}, oy[4] = {0.0, 0.0, 1.0 * s.height, 1.0 * s.height};
      for (std::size_t c = 0; c < 4; ++c)
        require(std::abs(p.corners[c][0] - ox[c]) <= dx && std::abs(p.corners[c][1] - oy[c]) <= dy, k,
                "corner displacement exceeds 0.2");
      break;
    }
    case AugKind::Jigsaw: {
      auto perm = params_as<JigsawParams>(s).permutation;
      std::sort(perm.begin(), perm.end());
      for (int i = 0; i < 16; ++i) require(perm[static_cast<std::size_t>(i)] == i, k, "not a permutation of 16 tiles");
      break;
    }
    case AugKind::Cutout: {
      const auto& p = params_as<CutoutParams>(s);
      require(p.x >= 0 && p.y >= 0 && p.width >= 1 && p.height >= 1 && p.x + p.width <= s.width &&
                  p.y + p.height <= s.height,
              k, "rectangle outside the patch");
      const double frac = static_cast<double>(p.width) * p.height / (static_cast<double>(s.width) * s.height);
      require(frac >= 0.02 && frac <= 0.25, k, "area outside [2%, 25%]");
      break;
    }
    case AugKind::ColourJitter: {
      const auto& p = params_as<ColourJitterParams>(s);
      for (double f : {p.brightness, p.contrast, p.saturation}) require(f >= 0.6 && f <= 1.4, k, "factor outside [0.6, 1.4]");
      require(std::abs(p.hue) <= 0.1, k, "hue shift exceeds 0.1");
      break;
    }
    case AugKind::AugMix: {
      const auto& p = params_as<AugMixParams>(s);
      double sum = 0.0;
      for (double w : p.weights) {
        require(w >= 0.0, k, "negative mixing weight");
        sum += w;
      }
      require(std::abs(sum - 1.0) <= 1e-12, k, "mixing weights must sum to 1");
      require(p.mix >= 0.0 && p.mix <= 1.0, k, "mix outside [0, 1]");
      for (const auto& chain : p.chains) {
        require(!chain.empty() && chain.size() <= 3, k, "chain depth outside [1, 3]");
        for (const auto& st : chain) {
          switch (st.op) {
            case AugMixOp::Posterize: require(st.value >= 3.0 && st.value <= 4.0, k, "posterize bits"); break;
            case AugMixOp::Solarize: require(st.value >= 179.0 && st.value <= 256.0, k, "solarize threshold"); break;
            case AugMixOp::Rotate: require(std::abs(st.value) <= 9.0, k, "rotation above severity"); break;
            case AugMixOp::ShearX:
            case AugMixOp::ShearY: require(std::abs(st.value) <= 0.09, k, "shear above severity"); break;
            case AugMixOp::TranslateX: require(std::abs(st.value) <= 0.1 * s.width, k, "translation above severity"); break;
            case AugMixOp::TranslateY: require(std::abs(st.value) <= 0.1 * s.height, k, "translation above severity"); break;
            default: break;
          }
        }
      }
      break;
    }
    default: require(std::holds_alternative<NoParams>(s.params), k, "kind takes no parameters"); break;
  }
}

Image apply_augmentation(const Image& img, const AugmentationSpec& s) {
  if (img.width != s.width || img.height != s.height)
    fail(ErrorKind::DimensionMismatch, "augmentation spec was sampled for a different patch size");
  Image out;
  switch (s.kind) {
    case AugKind::MacenkoPatch: {
      const auto& p = params_as<MacenkoParams>(s);
      try {
        out = macenko_normalise(img, macenko_fit(img, p.options), p.reference);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientTissue && e.kind() != ErrorKind::DegenerateCovariance) throw;
        out = img;
      }
      break;
    }
    case AugKind::Rotate90: out = aug::rotate90(img); break;
    case AugKind::Rotate180: out = aug::rotate180(img); break;
    case AugKind::Rotate270: out = aug::rotate270(img); break;
    case AugKind::RandomRotation: out = aug::rotate(img, params_as<RotationParams>(s).degrees); break;
    case AugKind::FlipH: out = aug::flip_h(img); break;
    case AugKind::FlipV: out = aug::flip_v(img); break;
    case AugKind::Zoom1_5: out = aug::zoom(img, 1.5); break;
    case AugKind::Zoom1_75: out = aug::zoom(img, 1.75); break;
    case AugKind::Zoom2: out = aug::zoom(img, 2.0); break;
    case AugKind::Affine: out = aug::affine(img, params_as<AffineParams>(s)); break;
    case AugKind::WarpPerspective: out = aug::perspective(img, params_as<PerspectiveParams>(s)); break;
    case AugKind::Jigsaw: out = aug::jigsaw(img, params_as<JigsawParams>(s)); break;
    case AugKind::Cutout: out = aug::cutout(img, params_as<CutoutParams>(s)); break;
    case AugKind::AugMix: out = aug::augmix(img, params_as<AugMixParams>(s)); break;
    case AugKind::BrightnessLow: out = aug::brightness(img, 0.7); break;
    case AugKind::BrightnessHigh: out = aug::brightness(img, 1.5); break;
    case AugKind::ContrastLow: out = aug::contrast(img, 0.7); break;
    case AugKind::ContrastHigh: out = aug::contrast(img, 1.5); break;
    case AugKind::SaturationLow: out = aug::saturation(img, 0.7); break;
    case AugKind::SaturationHigh: out = aug::saturation(img, 1.5); break;
    case AugKind::ColourJitter: out = aug::colour_jitter(img, params_as<ColourJitterParams>(s)); break;
    case AugKind::Gamma0_5: out = aug::gamma(img, 0.5); break;
    case AugKind::Gamma2_0: out = aug::gamma(img, 2.0); break;
    case AugKind::Sharpen: out = aug::sharpen(img, 5.0); break;
    case AugKind::GaussianBlur: out = aug::gaussian_blur(img, 5, 2.0); break;
    case AugKind::MedianBlur: out = aug::median_blur(img, 5); break;
  }
  return s.center_crop ? aug::zoom(out, 1.5) : out;
}

Patch apply_augmentation(const Patch& patch, const AugmentationSpec& spec) {
  return {apply_augmentation(patch.pixels, spec), patch.slide_id, patch.grid_pos};
}

}  // namespace wsibench
