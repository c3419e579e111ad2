// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/macenko.hpp"

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "wsibench/error.hpp"
#include "wsibench/stats.hpp"

namespace wsibench {

namespace {

const std::array<double, 256>& od_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = -std::log10((i + 1.0) / 256.0);
    return t;
  }();
  return table;
}

using StainMatrix = Eigen::Matrix<double, 3, 2>;

}  // namespace

double optical_density(std::uint8_t intensity) { return od_table()[intensity]; }

std::uint8_t intensity_from_od(double od) {
  const double v = 256.0 * std::pow(10.0, -od) - 1.0;
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

Eigen::Matrix3Xd optical_density(const Image& image) {
  const auto& t = od_table();
  Eigen::Matrix3Xd od(3, static_cast<Eigen::Index>(image.pixel_count()));
  for (Eigen::Index i = 0; i < od.cols(); ++i)
    for (int c = 0; c < 3; ++c) od(c, i) = t[image.pixels[static_cast<std::size_t>(i) * 3 + c]];
  return od;
}

StainProfile macenko_fit(const Image& image, const MacenkoOptions& o) {
  const Eigen::Matrix3Xd od = optical_density(image);
  std::vector<Eigen::Index> tissue;
  for (Eigen::Index i = 0; i < od.cols(); ++i)
    if (od.col(i).norm() > o.od_threshold) tissue.push_back(i);
  if (tissue.size() < o.min_tissue_pixels)
    fail(ErrorKind::InsufficientTissue, std::to_string(tissue.size()) + " tissue pixels above OD " +
                                            std::to_string(o.od_threshold) + ", need " +
                                            std::to_string(o.min_tissue_pixels));
  Eigen::Matrix3Xd t(3, static_cast<Eigen::Index>(tissue.size()));
  for (std::size_t k = 0; k < tissue.size(); ++k) t.col(static_cast<Eigen::Index>(k)) = od.col(tissue[k]);

  const Eigen::Vector3d mean = t.rowwise().mean();
  const Eigen::Matrix3Xd centered = t.colwise() - mean;
  const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(t.cols() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 0.0) || lambda(1) < o.min_eigen_ratio * lambda(2))
    fail(ErrorKind::DegenerateCovariance, "optical densities span fewer than two stain directions");
  Eigen::Vector3d v1 = eig.eigenvectors().col(2);
  Eigen::Vector3d v2 = eig.eigenvectors().col(1);
  if (v1.sum() < 0.0) v1 = -v1;
  if (v2.sum() < 0.0) v2 = -v2;

  std::vector<double> phi(tissue.size());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const auto col = t.col(static_cast<Eigen::Index>(k));
    phi[k] = std::atan2(v2.dot(col), v1.dot(col));
  }
  std::sort(phi.begin(), phi.end());
  const double lo = percentile_sorted(phi, o.angle_low_percentile / 100.0);
  const double hi = percentile_sorted(phi, o.angle_high_percentile / 100.0);
  Eigen::Vector3d a = std::cos(lo) * v1 + std::sin(lo) * v2;
  Eigen::Vector3d b = std::cos(hi) * v1 + std::sin(hi) * v2;
  if (a(0) < b(0)) std::swap(a, b);

  StainProfile p;
  p.stain_matrix.col(0) = a.cwiseMax(0.0);
  p.stain_matrix.col(1) = b.cwiseMax(0.0);
  for (int c = 0; c < 2; ++c) {
    const double n = p.stain_matrix.col(c).norm();
    if (!(n > 0.0)) fail(ErrorKind::DegenerateCovariance, "stain vector vanished after clamping");
    p.stain_matrix.col(c) /= n;
  }
  std::array<std::vector<double>, 2> conc;
  for (auto& v : conc) v.reserve(tissue.size());
  for (Eigen::Index k = 0; k < t.cols(); ++k) {
    const Eigen::Vector2d c = nnls2(p.stain_matrix, t.col(k));
    conc[0].push_back(c(0));
    conc[1].push_back(c(1));
  }
  for (int s = 0; s < 2; ++s) p.max_concentrations(s) = percentile(conc[static_cast<std::size_t>(s)], o.concentration_percentile / 100.0);
  if (!(p.max_concentrations.minCoeff() > 0.0))
    fail(ErrorKind::DegenerateCovariance, "a stain has zero concentration at the reference percentile");
  return p;
}

Eigen::Vector2d nnls2(const StainMatrix& s, const Eigen::Vector3d& od) {
  const double g00 = s.col(0).squaredNorm();
  const double g11 = s.col(1).squaredNorm();
  const double g01 = s.col(0).dot(s.col(1));
  const double r0 = s.col(0).dot(od);
  const double r1 = s.col(1).dot(od);
  const double det = g00 * g11 - g01 * g01;
  if (det > 0.0) {
    const Eigen::Vector2d c((g11 * r0 - g01 * r1) / det, (g00 * r1 - g01 * r0) / det);
    if (c(0) >= 0.0 && c(1) >= 0.0) return c;
  }
  // The optimum lies on a face of the orthant.
  const Eigen::Vector2d c0(std::max(0.0, r0 / g00), 0.0);
  const Eigen::Vector2d c1(0.0, std::max(0.0, r1 / g11));
  return (s * c0 - od).squaredNorm() <= (s * c1 - od).squaredNorm() ? c0 : c1;
}

Eigen::Matrix2Xd concentrations(const Image& image, const StainMatrix& stains) {
  const Eigen::Matrix3Xd od = optical_density(image);
  Eigen::Matrix2Xd c(2, od.cols());
  for (Eigen::Index i = 0; i < od.cols(); ++i) c.col(i) = nnls2(stains, od.col(i));
  return c;
}

Image macenko_normalise(const Image& image, const StainProfile& source, const StainProfile& reference) {
  const Eigen::Array2d scale = reference.max_concentrations.array() / source.max_concentrations.array();
  if (!scale.allFinite()) fail(ErrorKind::InvalidConfig, "stain profile has zero max concentration");
  const auto& t = od_table();
  Image out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const Eigen::Vector3d od(t[image.pixels[i * 3]], t[image.pixels[i * 3 + 1]], t[image.pixels[i * 3 + 2]]);
    const Eigen::Vector2d c = (nnls2(source.stain_matrix, od).array() * scale).matrix();
    const Eigen::Vector3d rec = reference.stain_matrix * c;
    for (int ch = 0; ch < 3; ++ch) out.pixels[i * 3 + ch] = intensity_from_od(rec(ch));
  }
  return out;
}

std::vector<Patch> normalise_slidewise(const Image& slide, const std::vector<Patch>& patches,
                                       const StainProfile& reference, const MacenkoOptions& options) {
  const StainProfile source = macenko_fit(slide, options);
  std::vector<Patch> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back({macenko_normalise(p.pixels, source, reference), p.slide_id, p.grid_pos});
  return out;
}

std::vector<Patch> normalise_patchwise(const std::vector<Patch>& patches, const StainProfile& reference,
                                       const MacenkoOptions& options) {
  std::vector<Patch> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    const StainProfile source = macenko_fit(p.pixels, options);
    out.push_back({macenko_normalise(p.pixels, source, reference), p.slide_id, p.grid_pos});
  }
  return out;
}

StainProfile default_reference_profile() {
  StainProfile p;
  p.stain_matrix << 0.5626, 0.2159,  //
      0.7201, 0.8012,                //
      0.4062, 0.5581;
  p.stain_matrix.col(0).normalize();
  p.stain_matrix.col(1).normalize();
  p.max_concentrations << 1.9705 / std::numbers::ln10, 1.0308 / std::numbers::ln10;
  return p;
}

std::string serialize_profile(const StainProfile& p) {
  nlohmann::json j;
  j["stain_matrix"] = {{p.stain_matrix(0, 0), p.stain_matrix(0, 1)},
                       {p.stain_matrix(1, 0), p.stain_matrix(1, 1)},
                       {p.stain_matrix(2, 0), p.stain_matrix(2, 1)}};
  j["max_concentrations"] = {p.max_concentrations(0), p.max_concentrations(1)};
  return j.dump(2);
}

StainProfile parse_profile(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    StainProfile p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c) p.stain_matrix(r, c) = j.at("stain_matrix").at(r).at(c).get<double>();
    for (int c = 0; c < 2; ++c) p.max_concentrations(c) = j.at("max_concentrations").at(c).get<double>();
    if ((p.stain_matrix.array() < 0.0).any() || !(p.max_concentrations.minCoeff() > 0.0))
      fail(ErrorKind::InvalidConfig, "stain profile must be non-negative with positive max concentrations");
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("bad stain profile: ") + e.what());
  }
}

}  // namespace wsibench
