// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles/oracles.hpp"
#include "wsibench/error.hpp"
#include "wsibench/macenko.hpp"
#include "wsibench/synthetic.hpp"

namespace wsibench {
namespace {

double angle_degrees(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

ErrorKind fit_error(const Image& img) {
  try {
    macenko_fit(img);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

TEST(OpticalDensity, MatchesDefinition) {
  EXPECT_EQ(optical_density(255), 0.0);
  EXPECT_DOUBLE_EQ(optical_density(0), std::log10(256.0));
  EXPECT_DOUBLE_EQ(optical_density(127), -std::log10(128.0 / 256.0));
  for (int i = 0; i < 256; ++i) EXPECT_EQ(intensity_from_od(optical_density(static_cast<std::uint8_t>(i))), i);
}

TEST(Macenko, AllWhiteIsInsufficientTissue) {
  EXPECT_EQ(fit_error(Image(64, 64, 255)), ErrorKind::InsufficientTissue);
}

TEST(Macenko, SinglePureStainIsDegenerate) {
  Rng rng(1);
  const Eigen::Vector3d h = Eigen::Vector3d(0.65, 0.70, 0.29).normalized();
  Image img(64, 64);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Eigen::Vector3d od = rng.uniform(0.2, 1.0) * h;
    for (int c = 0; c < 3; ++c) img.pixels[i * 3 + c] = intensity_from_od(od(c));
  }
  EXPECT_EQ(fit_error(img), ErrorKind::DegenerateCovariance);
}

TEST(Macenko, RecoversKnownStainsWithinTwoDegrees) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto stains = synth::random_stain_matrix(rng);
    const auto syn = synth::two_stain_image(stains, {}, rng);
    const auto p = macenko_fit(syn.image);
    for (int c = 0; c < 2; ++c) {
      EXPECT_LE(angle_degrees(p.stain_matrix.col(c), stains.col(c)), 2.0) << "image " << t << " stain " << c;
      EXPECT_NEAR(p.stain_matrix.col(c).norm(), 1.0, 1e-12);
    }
    EXPECT_TRUE((p.stain_matrix.array() >= 0.0).all());
    EXPECT_GT(p.stain_matrix(0, 0), p.stain_matrix(0, 1));
  }
}

TEST(Macenko, SelfNormalisationWithinTwoLevels) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto syn = synth::two_stain_image(synth::random_stain_matrix(rng), {}, rng);
    const auto p = macenko_fit(syn.image);
    const Image out = macenko_normalise(syn.image, p, p);
    int worst = 0;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
      worst = std::max(worst, std::abs(int{out.pixels[i]} - int{syn.image.pixels[i]}));
    EXPECT_LE(worst, 2) << "image " << t;
  }
}

TEST(Macenko, NormalisedConcentrationsMatchRescaledTruth) {
  Rng rng(4);
  const StainProfile ref = default_reference_profile();
  for (int t = 0; t < 10; ++t) {
    const auto syn = synth::two_stain_image(synth::random_stain_matrix(rng), {}, rng);
    const auto src = macenko_fit(syn.image);
    const auto c_out = concentrations(macenko_normalise(syn.image, src, ref), ref.stain_matrix);
    for (int s = 0; s < 2; ++s) {
      const double scale = ref.max_concentrations(s) / src.max_concentrations(s);
      double got = 0.0, want = 0.0;
      for (Eigen::Index i = 0; i < c_out.cols(); ++i) {
        if (syn.concentrations(s, i) < 0.1) continue;
        got += c_out(s, i);
        want += scale * syn.concentrations(s, i);
      }
      EXPECT_LE(std::abs(got - want) / want, 0.01) << "image " << t << " stain " << s;
    }
  }
}

TEST(Macenko, SinglePatchSlidewiseEqualsPatchwise) {
  Rng rng(5);
  const StainProfile ref = default_reference_profile();
  for (int t = 0; t < 5; ++t) {
    synth::TwoStainOptions o;
    o.width = o.height = 96;
    const auto syn = synth::two_stain_image(synth::random_stain_matrix(rng), o, rng);
    const auto patches = tile(syn.image, 96, "one");
    ASSERT_EQ(patches.size(), 1u);
    const auto a = normalise_slidewise(syn.image, patches, ref);
    const auto b = normalise_patchwise(patches, ref);
    EXPECT_EQ(a[0].pixels, b[0].pixels);
  }
}

TEST(Macenko, FitIsInvariantToPixelOrderOfInput) {
  Rng rng(6);
  const auto syn = synth::two_stain_image(synth::random_stain_matrix(rng), {}, rng);
  Image flipped(syn.image.width, syn.image.height);
  for (int y = 0; y < syn.image.height; ++y)
    for (int x = 0; x < syn.image.width; ++x)
      for (int c = 0; c < 3; ++c) flipped.at(syn.image.width - 1 - x, y, c) = syn.image.at(x, y, c);
  const auto a = macenko_fit(syn.image);
  const auto b = macenko_fit(flipped);
  EXPECT_TRUE(a.stain_matrix.isApprox(b.stain_matrix, 1e-9));
  EXPECT_TRUE(a.max_concentrations.isApprox(b.max_concentrations, 1e-9));
}

TEST(Nnls, MatchesProjectedGradientOracle) {
  Rng rng(7);
  for (int t = 0; t < 300; ++t) {
    Eigen::Matrix<double, 3, 2> a;
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0.0, 1.0);
    Eigen::Vector3d b;
    for (int i = 0; i < 3; ++i) b(i) = rng.uniform(-0.5, 1.5);
    const Eigen::Vector2d got = nnls2(a, b);
    const Eigen::Vector2d want = oracle::projected_gradient_nnls(a, b);
    EXPECT_GE(got.minCoeff(), 0.0);
    EXPECT_NEAR((a * got - b).squaredNorm(), (a * want - b).squaredNorm(), 1e-10);
  }
}

TEST(Profile, JsonRoundTripAndValidation) {
  const StainProfile p = default_reference_profile();
  EXPECT_EQ(parse_profile(serialize_profile(p)), p);
  try {
    parse_profile(R"({"stain_matrix": [[1, 0], [0, 1]], "max_concentrations": [1, 1]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
  }
}

}  // namespace
}  // namespace wsibench
