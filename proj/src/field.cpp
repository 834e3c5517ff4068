#include "rf/field.hpp"

#include <algorithm>
#include <cmath>

#include "rf/error.hpp"

namespace rf {

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 GridDims::unit_center(std::size_t idx) const {
  const auto c = coords(idx);
  return {(static_cast<double>(c[0]) + 0.5) / n[0], (static_cast<double>(c[1]) + 0.5) / n[1],
          (static_cast<double>(c[2]) + 0.5) / n[2]};
}

Vec3 BeamParams::direction_from_angles(double phi, double theta) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vec3 BeamParams::focal_spot() const {
  return {-tube_distance * direction[0], -tube_distance * direction[1],
          -tube_distance * direction[2]};
}

void BeamParams::validate() const {
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw Error(Errc::NonUnitDirection, "beam direction must have unit length");
  if (!(tube_distance > 0.0)) throw Error(Errc::OutOfRange, "tube distance must be positive");
  if (tube_spectrum.size() != kTubeBins)
    throw Error(Errc::LengthMismatch, "tube spectrum must have 150 bins");
  for (double v : tube_spectrum)
    if (!(v >= 0.0)) throw Error(Errc::NegativeBin, "tube spectrum entries must be >= 0");
}

const FieldChannel& RadiationField::channel(std::string_view name) const {
  for (const auto& c : channels)
    if (c.name == name) return c;
  throw Error(Errc::DimensionMismatch, "field has no channel '" + std::string(name) + "'");
}

bool RadiationField::has_channel(std::string_view name) const {
  return std::any_of(channels.begin(), channels.end(),
                     [&](const FieldChannel& c) { return c.name == name; });
}

Vec3 RadiationField::voxel_center(std::size_t idx) const {
  const auto c = dims.coords(idx);
  Vec3 out{};
  for (int a = 0; a < 3; ++a) {
    const double ext = voxel_extent[a];
    out[a] = (static_cast<double>(c[a]) + 0.5) * ext - 0.5 * ext * dims.n[a];
  }
  return out;
}

void RadiationField::validate() const {
  const std::size_t n = voxel_count();
  if (n == 0) throw Error(Errc::DimensionMismatch, "field has zero voxels");
  if (geometry.size() != n) throw Error(Errc::DimensionMismatch, "geometry size mismatch");
  for (const auto& ch : channels) {
    if (ch.fluence.size() != n || ch.rel_error.size() != n || ch.spectra.size() != n * kFieldBins)
      throw Error(Errc::DimensionMismatch, "channel '" + ch.name + "' array size mismatch");
    for (std::size_t v = 0; v < n; ++v) {
      if (!(ch.fluence[v] >= 0.0f))
        throw Error(Errc::OutOfRange, "negative fluence in channel '" + ch.name + "'");
      double total = 0.0;
      for (float p : ch.spectrum(v)) total += p;
      if (ch.fluence[v] > 0.0f && std::abs(total - 1.0) > 1e-6)
        throw Error(Errc::OutOfRange, "spectrum not normalized in channel '" + ch.name + "'");
    }
  }
}

ChannelSelect parse_channel_select(std::string_view name) {
  if (name == "beam") return ChannelSelect::Beam;
  if (name == "scatter") return ChannelSelect::Scatter;
  if (name == "total") return ChannelSelect::Total;
  throw Error(Errc::InvalidConfig, "unknown channel '" + std::string(name) + "'");
}

FieldChannel make_channel(std::string name, std::size_t voxels) {
  FieldChannel ch;
  ch.name = std::move(name);
  ch.fluence.assign(voxels, 0.0f);
  ch.spectra.assign(voxels * kFieldBins, 0.0f);
  ch.rel_error.assign(voxels, 0.0f);
  return ch;
}

FieldChannel select_channel(const RadiationField& field, ChannelSelect which) {
  switch (which) {
    case ChannelSelect::Beam: return field.channel("beam");
    case ChannelSelect::Scatter: return field.channel("scatter");
    case ChannelSelect::Total: break;
  }
  if (field.has_channel("total")) return field.channel("total");
  const auto& beam = field.channel("beam");
  const auto& scatter = field.channel("scatter");
  const std::size_t n = field.voxel_count();
  FieldChannel out = make_channel("total", n);
  for (std::size_t v = 0; v < n; ++v) {
    const double fb = beam.fluence[v], fs = scatter.fluence[v];
    const double total = fb + fs;
    out.fluence[v] = static_cast<float>(total);
    if (total > 0.0) {
      // Relative errors of independent tallies combine in quadrature.
      const double eb = fb * beam.rel_error[v], es = fs * scatter.rel_error[v];
      out.rel_error[v] = static_cast<float>(std::sqrt(eb * eb + es * es) / total);
      double mixed[kFieldBins];
      double mass = 0.0;
      for (std::size_t b = 0; b < kFieldBins; ++b) {
        mixed[b] = fb * beam.spectra[v * kFieldBins + b] + fs * scatter.spectra[v * kFieldBins + b];
        mass += mixed[b];
      }
      for (std::size_t b = 0; b < kFieldBins; ++b)
        out.spectra[v * kFieldBins + b] = static_cast<float>(mass > 0.0 ? mixed[b] / mass : 0.0);
    }
  }
  return out;
}

}  // namespace rf
