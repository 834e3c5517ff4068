#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rf/spectrum.hpp"

namespace rf {

using Vec3 = std::array<double, 3>;

double norm(const Vec3& v);
double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
Vec3 normalized(const Vec3& v);

/// Voxel counts per axis. Voxel arrays are stored x-fastest.
struct GridDims {
  std::array<std::uint32_t, 3> n{0, 0, 0};

  std::size_t voxels() const {
    return static_cast<std::size_t>(n[0]) * n[1] * n[2];
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + n[0] * (j + n[1] * k);
  }
  std::array<std::size_t, 3> coords(std::size_t idx) const {
    return {idx % n[0], (idx / n[0]) % n[1], idx / (static_cast<std::size_t>(n[0]) * n[1])};
  }
  /// Voxel center mapped into the unit cube, (i + 0.5) / n per axis.
  Vec3 unit_center(std::size_t idx) const;

  bool operator==(const GridDims&) const = default;
};

/// One scored quantity set of a field (direct beam, scatter, or a predicted total).
struct FieldChannel {
  std::string name;
  std::vector<float> fluence;    // N
  std::vector<float> spectra;    // N * 32, bin-fastest per voxel
  std::vector<float> rel_error;  // N

  std::span<const float> spectrum(std::size_t voxel) const {
    return {spectra.data() + voxel * kFieldBins, kFieldBins};
  }
  bool operator==(const FieldChannel&) const = default;
};

struct ConeBeam {
  double opening_angle_deg = 10.0;  // full opening angle
  bool operator==(const ConeBeam&) const = default;
};

/// Rectangular collimation, size measured in the plane through the isocenter
/// perpendicular to the beam axis.
struct RectBeam {
  double width = 0.40;
  double height = 0.30;
  bool operator==(const RectBeam&) const = default;
};

using BeamShape = std::variant<ConeBeam, RectBeam>;

struct BeamParams {
  Vec3 direction{0.0, 0.0, 1.0};  // propagation direction, unit length
  double tube_distance = 2.5;     // focal spot to isocenter, m
  std::vector<double> tube_spectrum = std::vector<double>(kTubeBins, 0.0);
  BeamShape shape = ConeBeam{};

  /// Direction for spherical angles phi (azimuth) and theta (polar).
  static Vec3 direction_from_angles(double phi, double theta);
  /// Focal spot position; the beam axis passes through the isocenter.
  Vec3 focal_spot() const;
  void validate() const;

  bool operator==(const BeamParams&) const = default;
};

struct RadiationField {
  GridDims dims;
  std::array<float, 3> voxel_extent{0.02f, 0.02f, 0.02f};  // m
  std::vector<FieldChannel> channels;
  std::vector<std::uint8_t> geometry;  // occupancy, N
  BeamParams meta;

  std::size_t voxel_count() const { return dims.voxels(); }
  const FieldChannel& channel(std::string_view name) const;
  bool has_channel(std::string_view name) const;
  /// Physical voxel center relative to the grid center, m.
  Vec3 voxel_center(std::size_t idx) const;
  /// Throws DimensionMismatch / OutOfRange when an invariant is violated.
  void validate() const;

  bool operator==(const RadiationField&) const = default;
};

enum class ChannelSelect { Beam, Scatter, Total };

ChannelSelect parse_channel_select(std::string_view name);

/// The requested channel. `Total` sums beam and scatter fluences and mixes
/// their spectra weighted by fluence; a field carrying a "total" channel
/// (e.g. a prediction) returns it unchanged.
FieldChannel select_channel(const RadiationField& field, ChannelSelect which);

/// Allocate a zero channel for N voxels.
FieldChannel make_channel(std::string name, std::size_t voxels);

}  // namespace rf
