// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "wsibench/image.hpp"
#include "wsibench/macenko.hpp"

namespace wsibench {

enum class AugKind : std::uint8_t {
  MacenkoPatch,
  Rotate90,
  Rotate180,
  Rotate270,
  RandomRotation,
  FlipH,
  FlipV,
  Zoom1_5,
  Zoom1_75,
  Zoom2,
  Affine,
  WarpPerspective,
  Jigsaw,
  Cutout,
  AugMix,
  BrightnessLow,
  BrightnessHigh,
  ContrastLow,
  ContrastHigh,
  SaturationLow,
  SaturationHigh,
  ColourJitter,
  Gamma0_5,
  Gamma2_0,
  Sharpen,
  GaussianBlur,
  MedianBlur,
};

inline constexpr std::size_t kAugmentationCount = 27;
extern const std::array<AugKind, kAugmentationCount> kAllAugmentations;
// The subset used by the rotate/flip group.
extern const std::array<AugKind, 5> kRotateFlipAugmentations;

std::string_view to_string(AugKind kind);
AugKind parse_aug_kind(std::string_view name);
bool is_stochastic(AugKind kind);

// ---------------------------------------------------------------------------
// Per-kind parameters. Geometric offsets are in pixels for the patch size the
// spec was sampled for.

struct NoParams {
  bool operator==(const NoParams&) const = default;
};
struct MacenkoParams {
  StainProfile reference;
  MacenkoOptions options;
  bool operator==(const MacenkoParams& o) const { return reference == o.reference; }
};
struct RotationParams {
  double degrees = 0.0;  // counter-clockwise
  bool operator==(const RotationParams&) const = default;
};
struct AffineParams {
  double rotation_degrees = 0.0;  // |.| <= 10
  double translate_x = 0.0;       // pixels, |.| <= 0.2 * width
  double translate_y = 0.0;
  double scale = 1.0;             // [0.8, 1.2]
  double shear_degrees = 0.0;     // |.| <= 10
  bool operator==(const AffineParams&) const = default;
};
struct PerspectiveParams {
  // Destination corners (top-left, top-right, bottom-right, bottom-left),
  // each displaced inwards by at most 0.2 of the half extent.
  std::array<std::array<double, 2>, 4> corners{};
  bool operator==(const PerspectiveParams&) const = default;
};
struct JigsawParams {
  std::array<int, 16> permutation{};  // destination tile i takes source tile permutation[i]
  bool operator==(const JigsawParams&) const = default;
};
struct CutoutParams {
  int x = 0, y = 0, width = 0, height = 0;
  bool operator==(const CutoutParams&) const = default;
};
struct ColourJitterParams {
  double brightness = 1.0;  // [0.6, 1.4]
  double contrast = 1.0;    // [0.6, 1.4]
  double saturation = 1.0;  // [0.6, 1.4]
  double hue = 0.0;         // [-0.1, 0.1] of a full turn
  bool operator==(const ColourJitterParams&) const = default;
};

enum class AugMixOp : std::uint8_t { AutoContrast, Equalize, Posterize, Solarize, Rotate, ShearX, ShearY, TranslateX, TranslateY };
struct AugMixStep {
  AugMixOp op = AugMixOp::AutoContrast;
  double value = 0.0;  // degrees, shear factor, pixels, bits or threshold depending on op
  bool operator==(const AugMixStep&) const = default;
};
struct AugMixParams {
  std::array<std::vector<AugMixStep>, 3> chains;  // depth 1..3 each
  std::array<double, 3> weights{};                // Dirichlet(1, 1, 1)
  double mix = 0.0;                               // Beta(1, 1)
  bool operator==(const AugMixParams&) const = default;
};

using AugParams = std::variant<NoParams, MacenkoParams, RotationParams, AffineParams, PerspectiveParams, JigsawParams,
                               CutoutParams, ColourJitterParams, AugMixParams>;

struct AugmentationSpec {
  AugKind kind = AugKind::Rotate90;
  std::uint64_t rng_seed = 0;
  int width = 0;  // patch size the parameters were sampled for
  int height = 0;
  bool center_crop = false;  // follow with a 1.5x centre zoom (removes rotation corners)
  AugParams params;
};

// Samples the parameters of `kind` from `rng_seed`; the result always
// satisfies validate(). Macenko requires a reference profile.
AugmentationSpec make_spec(AugKind kind, std::uint64_t rng_seed, int width, int height,
                           const std::optional<StainProfile>& reference = std::nullopt);
// Throws InvalidConfig when a parameter is outside its declared range.
void validate(const AugmentationSpec& spec);

Image apply_augmentation(const Image& image, const AugmentationSpec& spec);
Patch apply_augmentation(const Patch& patch, const AugmentationSpec& spec);

// Building blocks, exposed for tests and composition.
namespace aug {
Image rotate90(const Image& img);
Image rotate180(const Image& img);
Image rotate270(const Image& img);
Image flip_h(const Image& img);
Image flip_v(const Image& img);
Image rotate(const Image& img, double degrees);
Image zoom(const Image& img, double factor);
Image affine(const Image& img, const AffineParams& p);
Image perspective(const Image& img, const PerspectiveParams& p);
Image jigsaw(const Image& img, const JigsawParams& p);
Image cutout(const Image& img, const CutoutParams& p);
Image brightness(const Image& img, double factor);
Image contrast(const Image& img, double factor);
Image saturation(const Image& img, double factor);
Image hue(const Image& img, double shift);
Image colour_jitter(const Image& img, const ColourJitterParams& p);
Image gamma(const Image& img, double exponent);
Image sharpen(const Image& img, double factor);
Image gaussian_blur(const Image& img, int kernel, double sigma);
Image median_blur(const Image& img, int kernel);
Image augmix(const Image& img, const AugMixParams& p);
}  // namespace aug

}  // namespace wsibench
