// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "wsibench/image.hpp"

namespace wsibench {

struct StainProfile {
  Eigen::Matrix<double, 3, 2> stain_matrix;  // columns H, E; unit norm, non-negative
  Eigen::Vector2d max_concentrations;
  bool operator==(const StainProfile&) const = default;
};

struct MacenkoOptions {
  double od_threshold = 0.15;
  double angle_low_percentile = 1.0;
  double angle_high_percentile = 99.0;
  double concentration_percentile = 99.0;
  std::size_t min_tissue_pixels = 100;
  // Rank < 2 when the second eigenvalue falls below this fraction of the first.
  double min_eigen_ratio = 1e-3;
};

// OD = -log10((I + 1) / 256) per channel; 3 x pixel_count.
Eigen::Matrix3Xd optical_density(const Image& image);
double optical_density(std::uint8_t intensity);
std::uint8_t intensity_from_od(double od);

StainProfile macenko_fit(const Image& image, const MacenkoOptions& options = {});

// Non-negative least squares for OD = S c with two stains.
Eigen::Vector2d nnls2(const Eigen::Matrix<double, 3, 2>& stains, const Eigen::Vector3d& od);
Eigen::Matrix2Xd concentrations(const Image& image, const Eigen::Matrix<double, 3, 2>& stains);

// Rescales concentrations by reference.max / source.max and recomposes
// through the reference stain matrix.
Image macenko_normalise(const Image& image, const StainProfile& source, const StainProfile& reference);

// Slidewise: one profile fitted on the whole slide, applied to each patch.
std::vector<Patch> normalise_slidewise(const Image& slide, const std::vector<Patch>& patches,
                                       const StainProfile& reference, const MacenkoOptions& options = {});
// Patchwise: a profile fitted per patch.
std::vector<Patch> normalise_patchwise(const std::vector<Patch>& patches, const StainProfile& reference,
                                       const MacenkoOptions& options = {});

// A conventional H&E reference.
StainProfile default_reference_profile();

std::string serialize_profile(const StainProfile& profile);
StainProfile parse_profile(std::string_view json_text);

}  // namespace wsibench
