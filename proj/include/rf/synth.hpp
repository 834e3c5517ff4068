#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rf/field.hpp"

namespace rf::synth {

enum class Material { Aluminium, Copper, Water };

/// Linear attenuation coefficient in 1/m, log-log interpolated from a coarse
/// 10-point mass-attenuation table (10-150 keV) and extrapolated outside it.
double attenuation(Material m, double energy_kev);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

enum class ShapeKind { Cone, Rect };

struct GeneratorConfig {
  GridDims dims{{16, 16, 16}};
  std::array<float, 3> voxel_extent{0.04f, 0.04f, 0.04f};  // m
  Vec3 grid_center{0.0, 0.0, 0.0};                          // isocenter sits at the origin

  Range phi{0.0, 6.283185307179586};
  Range theta{0.0, 6.283185307179586};
  Range tube_distance{2.5, 2.5};  // m
  Range kvp{100.0, 100.0};        // keV
  Range t_al{4.0, 4.0};           // mm
  Range t_cu{0.15, 0.15};         // mm
  Range anode_angle{10.0, 10.0};  // deg; recorded only
  ShapeKind shape = ShapeKind::Cone;
  double cone_opening_deg = 10.0;
  double rect_width = 0.40;   // m, in the isocenter plane
  double rect_height = 0.30;  // m

  double phantom_radius = 0.15;  // m, water cylinder along z
  double phantom_height = 0.60;  // m

  std::uint64_t seed = 1;

  void validate() const;

  /// Fixed H-100-like tube, 10 deg cone at 2.5 m, direction varies.
  static GeneratorConfig ds01();
  /// ds01 plus sampled tube voltage and filtration.
  static GeneratorConfig ds02();
  /// ds02 plus tube distance in [0.35, 0.75] m and a 40 cm x 30 cm field.
  static GeneratorConfig ds03();
};

/// 150-bin tube spectrum: Kramers-shaped (kvp - E)/E, filtered by Al and Cu,
/// exactly zero above kvp, unit sum.
std::vector<double> gen_spectrum(double kvp, double t_al_mm, double t_cu_mm);

/// Same spectrum before renormalization (useful for attenuation comparisons).
std::vector<double> gen_spectrum_unnormalized(double kvp, double t_al_mm, double t_cu_mm);

/// Scatter fluence law around the beam/phantom interaction centroid.
struct ScatterLaw {
  double source = 1e-3;  // S0 relative to the entry beam fluence
  double decay_length = 0.5;  // lambda, m
  double core_radius = 0.04;  // r0, m

  double operator()(double entry_fluence, double r) const;
};

/// Field-bin shift toward lower energies per metre of distance from the
/// scattering centroid.
inline constexpr double kScatterSoftening = 6.0;

/// Softened copy of a 32-bin spectrum: mass moves `shift_bins` bins down,
/// split linearly between neighbours, with underflow collected in bin 0.
std::vector<double> soften_spectrum(std::span<const double> spectrum, double shift_bins);

/// Analytic beam + scatter field. Pure function of its inputs.
RadiationField gen_field(const BeamParams& params, const GeneratorConfig& cfg);

struct SampledParams {
  std::string file;
  BeamParams beam;
  double kvp = 0, t_al = 0, t_cu = 0, anode_angle = 0;
  std::uint64_t seed = 0;
};

/// Draws `count` parameter sets from cfg's ranges, reproducibly from cfg.seed.
std::vector<SampledParams> sample_params(const GeneratorConfig& cfg, std::size_t count);

nlohmann::json manifest_entry(const SampledParams& p);

/// Writes field_00000.srf ... plus manifest.json; returns the field paths.
std::vector<std::filesystem::path> gen_dataset(const GeneratorConfig& cfg, std::size_t count,
                                               const std::filesystem::path& out_dir);

nlohmann::json config_to_json(const GeneratorConfig& cfg);
GeneratorConfig config_from_json(const nlohmann::json& j, GeneratorConfig base = {});

}  // namespace rf::synth
