// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "wsibench/augment.hpp"
#include "wsibench/error.hpp"
#include "wsibench/synthetic.hpp"

namespace wsibench {
namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

Image tissue(int size, std::uint64_t seed) {
  Rng rng(seed);
  synth::TwoStainOptions o;
  o.width = o.height = size;
  return synth::two_stain_image(synth::random_stain_matrix(rng), o, rng).image;
}

AugmentationSpec spec_for(AugKind k, const Image& img, std::uint64_t seed = 1) {
  return make_spec(k, seed, img.width, img.height, default_reference_profile());
}

TEST(Dihedral, FourQuarterTurnsAreIdentity) {
  for (const Image& img : {random_image(32, 32, 1), random_image(17, 11, 2)}) {
    EXPECT_EQ(aug::rotate90(aug::rotate90(aug::rotate90(aug::rotate90(img)))), img);
    EXPECT_EQ(aug::rotate90(aug::rotate270(img)), img);
    EXPECT_EQ(aug::rotate270(aug::rotate90(img)), img);
    EXPECT_EQ(aug::flip_h(aug::flip_h(img)), img);
    EXPECT_EQ(aug::flip_v(aug::flip_v(img)), img);
    EXPECT_EQ(aug::rotate180(img), aug::flip_h(aug::flip_v(img)));
    EXPECT_EQ(aug::rotate180(img), aug::rotate90(aug::rotate90(img)));
  }
}

TEST(Dihedral, SpecsComposeToIdentity) {
  const Image img = random_image(24, 24, 3);
  const auto r90 = spec_for(AugKind::Rotate90, img);
  const auto fh = spec_for(AugKind::FlipH, img);
  Image x = img;
  for (int i = 0; i < 4; ++i) x = apply_augmentation(x, r90);
  EXPECT_EQ(x, img);
  EXPECT_EQ(apply_augmentation(apply_augmentation(img, fh), fh), img);
}

TEST(Dihedral, QuarterTurnIsCounterClockwise) {
  Image img(4, 4, 0);
  img.at(3, 0, 0) = 200;  // top-right
  const Image r = aug::rotate90(img);
  EXPECT_EQ(r.at(0, 0, 0), 200);  // now top-left
}

TEST(Geometric, ZeroParametersAreIdentity) {
  const Image img = random_image(20, 20, 4);
  EXPECT_EQ(aug::rotate(img, 0.0), img);
  EXPECT_EQ(aug::zoom(img, 1.0), img);
  EXPECT_EQ(aug::affine(img, AffineParams{}), img);
  PerspectiveParams p;
  p.corners = {{{0.0, 0.0}, {20.0, 0.0}, {20.0, 20.0}, {0.0, 20.0}}};
  EXPECT_EQ(aug::perspective(img, p), img);
  JigsawParams j;
  std::iota(j.permutation.begin(), j.permutation.end(), 0);
  EXPECT_EQ(aug::jigsaw(img, j), img);
}

TEST(Geometric, ResampledQuarterTurnMatchesPermutation) {
  const Image img = random_image(16, 16, 5);
  EXPECT_EQ(aug::rotate(img, 90.0), aug::rotate90(img));
}

TEST(Geometric, OffAxisRotationBlackensCorners) {
  const Image img(32, 32, 200);
  const Image r = aug::rotate(img, 45.0);
  EXPECT_EQ(r.at(0, 0, 0), 0);
  EXPECT_EQ(r.at(16, 16, 0), 200);
  // The 1.5x centre crop removes every black pixel for any angle.
  const Image cropped = aug::zoom(r, 1.5);
  for (auto v : cropped.pixels) EXPECT_EQ(v, 200);
}

TEST(Geometric, ZoomKeepsCentredMarkerAndScalesExtent) {
  for (double z : {1.5, 1.75, 2.0}) {
    Image img(64, 64, 0);
    for (int y = 28; y < 36; ++y)
      for (int x = 28; x < 36; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = 255;
    const Image out = aug::zoom(img, z);
    double sx = 0, sy = 0, mass = 0;
    int lo = 64, hi = -1;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double v = out.at(x, y, 0);
        sx += v * (x + 0.5);
        sy += v * (y + 0.5);
        mass += v;
        if (y == 32 && v >= 128) lo = std::min(lo, x), hi = std::max(hi, x);
      }
    // Centred up to 8-bit rounding of the interpolated edge.
    EXPECT_NEAR(sx / mass, 32.0, 0.01) << z;
    EXPECT_NEAR(sy / mass, 32.0, 0.01) << z;
    EXPECT_NEAR(hi - lo + 1, 8.0 * z, 1.0) << z;
  }
}

TEST(Geometric, JigsawPermutesTiles) {
  const Image img = random_image(32, 32, 6);
  const auto spec = spec_for(AugKind::Jigsaw, img, 9);
  const Image out = apply_augmentation(img, spec);
  const auto& perm = std::get<JigsawParams>(spec.params).permutation;
  for (int dst = 0; dst < 16; ++dst) {
    const int src = perm[static_cast<std::size_t>(dst)];
    EXPECT_EQ(out.crop((dst % 4) * 8, (dst / 4) * 8, 8, 8), img.crop((src % 4) * 8, (src / 4) * 8, 8, 8));
  }
}

TEST(ParameterRanges, HoldOverThousandsOfSampledSpecs) {
  const int sizes[] = {16, 37, 64, 224};
  int sampled = 0;
  for (AugKind k : kAllAugmentations) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const int size = sizes[seed % 4];
      const auto s = make_spec(k, seed, size, size, default_reference_profile());
      EXPECT_NO_THROW(validate(s));
      ++sampled;
    }
  }
  EXPECT_GE(sampled, 1000);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const int size = sizes[seed % 4];
    const auto cut = std::get<CutoutParams>(make_spec(AugKind::Cutout, seed, size, size).params);
    const double frac = static_cast<double>(cut.width) * cut.height / (size * size);
    EXPECT_GE(frac, 0.02);
    EXPECT_LE(frac, 0.25);
    EXPECT_LE(cut.x + cut.width, size);
    EXPECT_LE(cut.y + cut.height, size);
    const double beta = std::get<RotationParams>(make_spec(AugKind::RandomRotation, seed, size, size).params).degrees;
    EXPECT_GE(std::fmod(beta, 90.0), 10.0);
    EXPECT_LE(std::fmod(beta, 90.0), 80.0);
    EXPECT_GE(beta, 0.0);
    EXPECT_LT(beta, 360.0);
  }
}

TEST(ParameterRanges, ValidateRejectsOutOfRange) {
  auto s = make_spec(AugKind::RandomRotation, 1, 32, 32);
  s.params = RotationParams{95.0};
  EXPECT_THROW(validate(s), Error);
  auto c = make_spec(AugKind::Cutout, 1, 32, 32);
  c.params = CutoutParams{0, 0, 32, 32};
  EXPECT_THROW(validate(c), Error);
  auto a = make_spec(AugKind::Affine, 1, 32, 32);
  std::get<AffineParams>(a.params).scale = 1.5;
  EXPECT_THROW(validate(a), Error);
  auto j = make_spec(AugKind::ColourJitter, 1, 32, 32);
  std::get<ColourJitterParams>(j.params).hue = 0.2;
  EXPECT_THROW(validate(j), Error);
  auto wrong = make_spec(AugKind::Rotate90, 1, 32, 32);
  wrong.params = RotationParams{};
  EXPECT_THROW(validate(wrong), Error);
  EXPECT_THROW(make_spec(AugKind::MacenkoPatch, 1, 32, 32), Error);
}

TEST(Determinism, IdenticalSpecsGiveIdenticalBytes) {
  const Image img = tissue(48, 7);
  for (AugKind k : kAllAugmentations) {
    const auto a = spec_for(k, img, 123);
    const auto b = spec_for(k, img, 123);
    const Image x = apply_augmentation(img, a);
    EXPECT_EQ(x, apply_augmentation(img, b)) << to_string(k);
    EXPECT_EQ(x.width, img.width);
    EXPECT_EQ(x.height, img.height);
  }
}

TEST(Determinism, StochasticKindsVaryWithSeed) {
  const Image img = tissue(48, 8);
  for (AugKind k : kAllAugmentations) {
    if (!is_stochastic(k)) continue;
    std::set<std::vector<std::uint8_t>> outputs;
    for (std::uint64_t seed = 0; seed < 4; ++seed) outputs.insert(apply_augmentation(img, spec_for(k, img, seed)).pixels);
    EXPECT_GT(outputs.size(), 1u) << to_string(k);
  }
}

TEST(Names, RoundTripAndCount) {
  std::set<std::string_view> names;
  for (AugKind k : kAllAugmentations) {
    names.insert(to_string(k));
    EXPECT_EQ(parse_aug_kind(to_string(k)), k);
  }
  EXPECT_EQ(names.size(), 27u);
  EXPECT_THROW(parse_aug_kind("rotate45"), Error);
}

TEST(Photometric, UnitFactorsAreIdentity) {
  const Image img = random_image(12, 12, 10);
  EXPECT_EQ(aug::brightness(img, 1.0), img);
  EXPECT_EQ(aug::contrast(img, 1.0), img);
  EXPECT_EQ(aug::saturation(img, 1.0), img);
  EXPECT_EQ(aug::hue(img, 0.0), img);
  EXPECT_EQ(aug::gamma(img, 1.0), img);
  EXPECT_EQ(aug::sharpen(img, 1.0), img);
  EXPECT_EQ(aug::colour_jitter(img, ColourJitterParams{}), img);
}

TEST(Photometric, KnownValues) {
  Image img(1, 1);
  img.pixels = {100, 50, 200};
  EXPECT_EQ(aug::brightness(img, 1.5).pixels, (std::vector<std::uint8_t>{150, 75, 255}));
  EXPECT_EQ(aug::brightness(img, 0.7).pixels, (std::vector<std::uint8_t>{70, 35, 140}));
  const double gray = 0.299 * 100 + 0.587 * 50 + 0.114 * 200;
  const auto sat = aug::saturation(img, 0.0).pixels;
  for (auto v : sat) EXPECT_EQ(v, static_cast<std::uint8_t>(std::nearbyint(gray)));
  EXPECT_EQ(aug::gamma(img, 2.0).pixels[0], static_cast<std::uint8_t>(std::nearbyint(255.0 * std::pow(100.0 / 255.0, 2.0))));
  // Contrast on a one-pixel image blends towards its own luma.
  EXPECT_EQ(aug::contrast(img, 0.0).pixels, sat);
  // Hue shift of a full third turn cycles the primaries.
  Image red(1, 1);
  red.pixels = {255, 0, 0};
  EXPECT_EQ(aug::hue(red, 1.0 / 3.0).pixels, (std::vector<std::uint8_t>{0, 255, 0}));
}

TEST(Photometric, GrayIsHueAndSaturationInvariant) {
  Image img(8, 8);
  Rng rng(11);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    img.pixels[i * 3] = img.pixels[i * 3 + 1] = img.pixels[i * 3 + 2] = static_cast<std::uint8_t>(rng.below(256));
  EXPECT_EQ(aug::hue(img, 0.07), img);
  EXPECT_EQ(aug::saturation(img, 1.5), img);
}

TEST(Filters, ConstantImagesAreFixedPoints) {
  const Image flat(16, 16, 90);
  EXPECT_EQ(aug::gaussian_blur(flat, 5, 2.0), flat);
  EXPECT_EQ(aug::median_blur(flat, 5), flat);
  EXPECT_EQ(aug::sharpen(flat, 5.0), flat);
}

TEST(Filters, MedianRemovesIsolatedSpike) {
  Image img(9, 9, 10);
  img.at(4, 4, 1) = 250;
  EXPECT_EQ(aug::median_blur(img, 5), Image(9, 9, 10));
}

TEST(Filters, SharpenLeavesBorderUnchanged) {
  const Image img = random_image(10, 10, 12);
  const Image s = aug::sharpen(img, 5.0);
  for (int i = 0; i < 10; ++i)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(s.at(i, 0, c), img.at(i, 0, c));
      EXPECT_EQ(s.at(0, i, c), img.at(0, i, c));
      EXPECT_EQ(s.at(i, 9, c), img.at(i, 9, c));
      EXPECT_EQ(s.at(9, i, c), img.at(9, i, c));
    }
}

TEST(Filters, GaussianBlurPreservesMeanOfSmoothContent) {
  Image img(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(100 + 50 * std::sin(x / 5.0));
  const Image b = aug::gaussian_blur(img, 5, 2.0);
  double d = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) d += static_cast<double>(b.pixels[i]) - img.pixels[i];
  EXPECT_LT(std::abs(d / img.pixels.size()), 1.0);
}

TEST(AugMix, ZeroMixReturnsOriginal) {
  const Image img = tissue(32, 13);
  auto s = spec_for(AugKind::AugMix, img, 3);
  std::get<AugMixParams>(s.params).mix = 0.0;
  EXPECT_EQ(apply_augmentation(img, s), img);
}

TEST(Macenko, PatchKindNormalisesTissueAndKeepsBlankPatches) {
  const Image img = tissue(64, 14);
  const auto s = spec_for(AugKind::MacenkoPatch, img);
  const auto ref = default_reference_profile();
  EXPECT_EQ(apply_augmentation(img, s), macenko_normalise(img, macenko_fit(img), ref));
  const Image blank(64, 64, 255);
  EXPECT_EQ(apply_augmentation(blank, s), blank);
}

TEST(Flags, CentreCropAppliesZoomAfterwards) {
  const Image img = tissue(32, 15);
  auto s = spec_for(AugKind::RandomRotation, img, 4);
  const Image plain = apply_augmentation(img, s);
  s.center_crop = true;
  EXPECT_EQ(apply_augmentation(img, s), aug::zoom(plain, 1.5));
}

TEST(Flags, WrongPatchSizeIsRejected) {
  const auto s = make_spec(AugKind::Cutout, 1, 32, 32);
  try {
    apply_augmentation(random_image(16, 16, 1), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

}  // namespace
}  // namespace wsibench
