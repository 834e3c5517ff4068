#include "rf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rf/binary.hpp"
#include "rf/error.hpp"
#include "rf/json_io.hpp"
#include "rf/parallel.hpp"
#include "rf/srf_io.hpp"

namespace rf::synth {
namespace {

// Mass attenuation coefficients mu/rho [cm^2/g] (NIST XCOM, total with
// coherent scattering) at 10, 15, 20, 30, 40, 50, 60, 80, 100, 150 keV.
constexpr std::array<double, 10> kTableEnergy{10, 15, 20, 30, 40, 50, 60, 80, 100, 150};
constexpr std::array<double, 10> kAluminium{26.23, 7.955, 3.441, 1.128, 0.5685,
                                            0.3681, 0.2778, 0.2018, 0.1704, 0.1378};
constexpr std::array<double, 10> kCopper{215.9, 74.05, 33.79, 10.92, 4.862,
                                         2.613, 1.593, 0.7630, 0.4584, 0.2217};
constexpr std::array<double, 10> kWater{5.329, 1.673, 0.8096, 0.3756, 0.2683,
                                        0.2269, 0.2059, 0.1837, 0.1707, 0.1505};

double log_log_interp(const std::array<double, 10>& mu, double e) {
  std::size_t i = 0;
  if (e <= kTableEnergy.front()) {
    i = 0;
  } else if (e >= kTableEnergy.back()) {
    i = kTableEnergy.size() - 2;
  } else {
    while (kTableEnergy[i + 1] < e) ++i;
  }
  const double t = std::log(e / kTableEnergy[i]) / std::log(kTableEnergy[i + 1] / kTableEnergy[i]);
  return std::exp(std::log(mu[i]) + t * std::log(mu[i + 1] / mu[i]));
}

double uniform(std::mt19937_64& rng, const Range& r) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return r.lo + (r.hi - r.lo) * u(rng);
}

// Parameter interval of the line p + s*d inside the z-aligned cylinder.
bool cylinder_interval(const Vec3& p, const Vec3& d, double radius, double height, double& s0,
                       double& s1) {
  s0 = -std::numeric_limits<double>::infinity();
  s1 = std::numeric_limits<double>::infinity();
  const double a = d[0] * d[0] + d[1] * d[1];
  const double b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
  const double c = p[0] * p[0] + p[1] * p[1] - radius * radius;
  if (a < 1e-300) {
    if (c > 0.0) return false;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    s0 = (-b - sq) / (2.0 * a);
    s1 = (-b + sq) / (2.0 * a);
  }
  const double half = 0.5 * height;
  if (std::abs(d[2]) < 1e-300) {
    if (std::abs(p[2]) > half) return false;
  } else {
    double z0 = (-half - p[2]) / d[2];
    double z1 = (half - p[2]) / d[2];
    if (z0 > z1) std::swap(z0, z1);
    s0 = std::max(s0, z0);
    s1 = std::min(s1, z1);
  }
  return s0 < s1;
}

bool ray_hits_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

double attenuation(Material m, double energy_kev) {
  switch (m) {
    case Material::Aluminium: return log_log_interp(kAluminium, energy_kev) * 2.699 * 100.0;
    case Material::Copper: return log_log_interp(kCopper, energy_kev) * 8.96 * 100.0;
    case Material::Water: return log_log_interp(kWater, energy_kev) * 1.0 * 100.0;
  }
  return 0.0;
}

void GeneratorConfig::validate() const {
  for (auto n : dims.n)
    if (n < 2) throw Error(Errc::InvalidConfig, "generator grid needs >= 2 voxels per axis");
  for (float e : voxel_extent)
    if (!(e > 0.0f)) throw Error(Errc::InvalidConfig, "voxel extent must be positive");
  for (const Range* r : {&phi, &theta, &tube_distance, &kvp, &t_al, &t_cu, &anode_angle})
    if (!(r->lo <= r->hi)) throw Error(Errc::InvalidConfig, "range lower bound exceeds upper bound");
  if (!(tube_distance.lo > 0.0)) throw Error(Errc::InvalidConfig, "tube distance must be positive");
  if (!(phantom_radius > 0.0 && phantom_height > 0.0))
    throw Error(Errc::InvalidConfig, "phantom dimensions must be positive");
}

GeneratorConfig GeneratorConfig::ds01() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::ds02() {
  GeneratorConfig c;
  c.kvp = {40.0, 125.0};
  c.t_al = {2.5, 7.5};
  c.t_cu = {0.0, 0.9};
  c.anode_angle = {8.0, 12.0};
  return c;
}

GeneratorConfig GeneratorConfig::ds03() {
  GeneratorConfig c = ds02();
  c.tube_distance = {0.35, 0.75};
  c.shape = ShapeKind::Rect;
  return c;
}

std::vector<double> gen_spectrum_unnormalized(double kvp, double t_al_mm, double t_cu_mm) {
  if (!(kvp > 0.0)) throw Error(Errc::NonPositiveKvp, "tube voltage must be positive");
  if (t_al_mm < 0.0 || t_cu_mm < 0.0) throw Error(Errc::OutOfRange, "filter thickness must be >= 0");
  if (kvp < 40.0 || kvp > 125.0) warn("tube voltage outside [40, 125] keV");
  std::vector<double> s(kTubeBins, 0.0);
  for (std::size_t i = 0; i < kTubeBins; ++i) {
    const double e = tube_bin_mid(i);
    if (e >= kvp) continue;
    const double filter = attenuation(Material::Aluminium, e) * t_al_mm * 1e-3 +
                          attenuation(Material::Copper, e) * t_cu_mm * 1e-3;
    s[i] = (kvp - e) / e * std::exp(-filter);
  }
  return s;
}

std::vector<double> gen_spectrum(double kvp, double t_al_mm, double t_cu_mm) {
  auto s = gen_spectrum_unnormalized(kvp, t_al_mm, t_cu_mm);
  double total = 0.0;
  for (double v : s) total += v;
  if (!(total > 0.0)) throw Error(Errc::NonPositiveKvp, "tube voltage too low for any 1 keV bin");
  for (double& v : s) v /= total;
  return s;
}

double ScatterLaw::operator()(double entry_fluence, double r) const {
  const double rr = std::max(r, core_radius);
  return source * entry_fluence * std::exp(-r / decay_length) / (rr * rr);
}

std::vector<double> soften_spectrum(std::span<const double> spectrum, double shift_bins) {
  std::vector<double> out(spectrum.size(), 0.0);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double pos = static_cast<double>(i) - shift_bins;
    if (pos <= 0.0) {
      out[0] += spectrum[i];
      continue;
    }
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    out[lo] += spectrum[i] * (1.0 - frac);
    if (frac > 0.0) out[lo + 1] += spectrum[i] * frac;
  }
  return out;
}

RadiationField gen_field(const BeamParams& params, const GeneratorConfig& cfg) {
  cfg.validate();
  params.validate();

  const auto tube = unit_sum(params.tube_spectrum);
  auto spec32 = unit_sum(resample_histogram(tube, kFieldBins));
  double spec_mass = 0.0;
  for (double v : spec32) spec_mass += v;
  if (!(spec_mass > 0.0)) throw Error(Errc::OutOfRange, "tube spectrum is empty");

  std::array<double, kFieldBins> mu_water{};
  for (std::size_t b = 0; b < kFieldBins; ++b)
    mu_water[b] = attenuation(Material::Water, field_bin_mid(b));
  auto transmission = [&](double path) {
    if (path <= 0.0) return 1.0;
    double t = 0.0;
    for (std::size_t b = 0; b < kFieldBins; ++b) t += spec32[b] * std::exp(-mu_water[b] * path);
    return t;
  };

  const Vec3& dir = params.direction;
  const Vec3 focal = params.focal_spot();
  const double min_extent =
      std::min({cfg.voxel_extent[0], cfg.voxel_extent[1], cfg.voxel_extent[2]});
  const double mean_extent =
      (cfg.voxel_extent[0] + cfg.voxel_extent[1] + cfg.voxel_extent[2]) / 3.0;
  const double d_min = 0.5 * min_extent;

  Vec3 box_lo{}, box_hi{};
  for (int a = 0; a < 3; ++a) {
    const double half = 0.5 * cfg.voxel_extent[a] * cfg.dims.n[a];
    box_lo[a] = cfg.grid_center[a] - half;
    box_hi[a] = cfg.grid_center[a] + half;
  }
  if (!ray_hits_box(focal, dir, box_lo, box_hi))
    throw Error(Errc::BeamMissesVolume, "beam axis does not intersect the grid volume");

  // Axis chord through the phantom defines the entry fluence and the
  // scattering centroid. The axis passes the isocenter, which is inside.
  double s_in = 0.0, s_out = 0.0;
  if (!cylinder_interval(focal, dir, cfg.phantom_radius, cfg.phantom_height, s_in, s_out)) {
    s_in = s_out = params.tube_distance;
  }
  s_in = std::max(s_in, d_min);
  s_out = std::max(s_out, s_in);
  const double entry_fluence = 1.0 / (s_in * s_in);
  const double s_mid = 0.5 * (s_in + s_out);
  const Vec3 centroid{focal[0] + s_mid * dir[0], focal[1] + s_mid * dir[1], focal[2] + s_mid * dir[2]};

  Vec3 u = cross(dir, Vec3{0.0, 0.0, 1.0});
  if (norm(u) < 1e-6) u = cross(dir, Vec3{1.0, 0.0, 0.0});
  u = normalized(u);
  const Vec3 w = cross(dir, u);

  const ScatterLaw law{1e-3, 0.5, mean_extent};

  RadiationField f;
  f.dims = cfg.dims;
  f.voxel_extent = cfg.voxel_extent;
  f.meta = params;
  const std::size_t n = f.voxel_count();
  FieldChannel beam = make_channel("beam", n);
  FieldChannel scatter = make_channel("scatter", n);
  f.geometry.assign(n, 0);

  for (std::size_t v = 0; v < n; ++v) {
    Vec3 pos = f.voxel_center(v);
    for (int a = 0; a < 3; ++a) pos[a] += cfg.grid_center[a];

    const double lateral2 = pos[0] * pos[0] + pos[1] * pos[1];
    f.geometry[v] = (lateral2 <= cfg.phantom_radius * cfg.phantom_radius &&
                     std::abs(pos[2]) <= 0.5 * cfg.phantom_height)
                        ? 1
                        : 0;

    const Vec3 rel{pos[0] - focal[0], pos[1] - focal[1], pos[2] - focal[2]};
    const double along = dot(rel, dir);
    bool inside = false;
    if (along > 0.0) {
      if (const auto* cone = std::get_if<ConeBeam>(&params.shape)) {
        const double half = 0.5 * cone->opening_angle_deg * std::numbers::pi / 180.0;
        const double lat2 = std::max(0.0, dot(rel, rel) - along * along);
        inside = std::sqrt(lat2) <= along * std::tan(half);
      } else {
        const auto& rect = std::get<RectBeam>(params.shape);
        const double scale = params.tube_distance / along;
        inside = std::abs(dot(rel, u) * scale) <= 0.5 * rect.width &&
                 std::abs(dot(rel, w) * scale) <= 0.5 * rect.height;
      }
    }
    if (inside) {
      const double dist = norm(rel);
      double path = 0.0, c0 = 0.0, c1 = 0.0;
      if (cylinder_interval(focal, rel, cfg.phantom_radius, cfg.phantom_height, c0, c1)) {
        c0 = std::clamp(c0, 0.0, 1.0);
        c1 = std::clamp(c1, 0.0, 1.0);
        path = std::max(0.0, c1 - c0) * dist;
      }
      const double d = std::max(dist, d_min);
      beam.fluence[v] = static_cast<float>(transmission(path) / (d * d));
      for (std::size_t b = 0; b < kFieldBins; ++b)
        beam.spectra[v * kFieldBins + b] = static_cast<float>(spec32[b]);
    }

    const Vec3 off{pos[0] - centroid[0], pos[1] - centroid[1], pos[2] - centroid[2]};
    const double r = norm(off);
    scatter.fluence[v] = static_cast<float>(law(entry_fluence, r));
    const auto soft = soften_spectrum(spec32, kScatterSoftening * r);
    for (std::size_t b = 0; b < kFieldBins; ++b)
      scatter.spectra[v * kFieldBins + b] = static_cast<float>(soft[b]);
  }

  // Synthetic tally uncertainty, falling with the square root of fluence.
  for (FieldChannel* ch : {&beam, &scatter}) {
    const float peak = *std::max_element(ch->fluence.begin(), ch->fluence.end());
    for (std::size_t v = 0; v < n; ++v) {
      if (ch->fluence[v] > 0.0f)
        ch->rel_error[v] = static_cast<float>(
            std::min(1.0, 0.01 * std::sqrt(static_cast<double>(peak) / ch->fluence[v])));
    }
  }
  f.channels.push_back(std::move(beam));
  f.channels.push_back(std::move(scatter));
  return f;
}

std::vector<SampledParams> sample_params(const GeneratorConfig& cfg, std::size_t count) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<SampledParams> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    SampledParams p;
    const double phi = uniform(rng, cfg.phi);
    const double theta = uniform(rng, cfg.theta);
    p.beam.direction = BeamParams::direction_from_angles(phi, theta);
    p.beam.tube_distance = uniform(rng, cfg.tube_distance);
    p.kvp = uniform(rng, cfg.kvp);
    p.t_al = uniform(rng, cfg.t_al);
    p.t_cu = uniform(rng, cfg.t_cu);
    p.anode_angle = uniform(rng, cfg.anode_angle);
    p.seed = rng();
    p.beam.tube_spectrum = gen_spectrum(p.kvp, p.t_al, p.t_cu);
    if (cfg.shape == ShapeKind::Cone)
      p.beam.shape = ConeBeam{cfg.cone_opening_deg};
    else
      p.beam.shape = RectBeam{cfg.rect_width, cfg.rect_height};
    char name[32];
    std::snprintf(name, sizeof(name), "field_%05zu.srf", k);
    p.file = name;
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json manifest_entry(const SampledParams& p) {
  return {{"file", p.file},
          {"direction", p.beam.direction},
          {"tube_distance", p.beam.tube_distance},
          {"kvp", p.kvp},
          {"t_al", p.t_al},
          {"t_cu", p.t_cu},
          {"beam_shape", beam_shape_to_json(p.beam.shape)},
          {"seed", p.seed}};
}

std::vector<std::filesystem::path> gen_dataset(const GeneratorConfig& cfg, std::size_t count,
                                               const std::filesystem::path& out_dir) {
  if (count == 0) throw Error(Errc::InvalidConfig, "count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw Error(Errc::IoFailure, "cannot create " + out_dir.string());

  const auto params = sample_params(cfg, count);
  std::vector<std::filesystem::path> paths(count);
  parallel_for(count, [&](std::size_t k) {
    paths[k] = out_dir / params[k].file;
    write_field(gen_field(params[k].beam, cfg), paths[k]);
  });

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& p : params) manifest.push_back(manifest_entry(p));
  const std::string text = manifest.dump(2) + "\n";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  io::write_file(out_dir / "manifest.json", bytes);
  return paths;
}

namespace {
nlohmann::json range_json(const Range& r) { return {r.lo, r.hi}; }
Range range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
}  // namespace

nlohmann::json config_to_json(const GeneratorConfig& c) {
  return {{"dims", c.dims.n},
          {"voxel_extent", c.voxel_extent},
          {"grid_center", c.grid_center},
          {"phi", range_json(c.phi)},
          {"theta", range_json(c.theta)},
          {"tube_distance", range_json(c.tube_distance)},
          {"kvp", range_json(c.kvp)},
          {"t_al", range_json(c.t_al)},
          {"t_cu", range_json(c.t_cu)},
          {"anode_angle", range_json(c.anode_angle)},
          {"shape", c.shape == ShapeKind::Cone ? "cone" : "rect"},
          {"cone_opening_deg", c.cone_opening_deg},
          {"rect_width", c.rect_width},
          {"rect_height", c.rect_height},
          {"phantom_radius", c.phantom_radius},
          {"phantom_height", c.phantom_height},
          {"seed", c.seed}};
}

GeneratorConfig config_from_json(const nlohmann::json& j, GeneratorConfig c) {
  if (j.contains("dims")) c.dims.n = j["dims"].get<std::array<std::uint32_t, 3>>();
  if (j.contains("voxel_extent")) c.voxel_extent = j["voxel_extent"].get<std::array<float, 3>>();
  if (j.contains("grid_center")) c.grid_center = j["grid_center"].get<Vec3>();
  for (auto [key, range] : {std::pair{"phi", &c.phi}, {"theta", &c.theta},
                            {"tube_distance", &c.tube_distance}, {"kvp", &c.kvp},
                            {"t_al", &c.t_al}, {"t_cu", &c.t_cu}, {"anode_angle", &c.anode_angle}})
    if (j.contains(key)) *range = range_from(j[key]);
  if (j.contains("shape")) {
    const auto s = j["shape"].get<std::string>();
    if (s == "cone") c.shape = ShapeKind::Cone;
    else if (s == "rect") c.shape = ShapeKind::Rect;
    else throw Error(Errc::InvalidConfig, "shape must be 'cone' or 'rect'");
  }
  if (j.contains("cone_opening_deg")) c.cone_opening_deg = j["cone_opening_deg"].get<double>();
  if (j.contains("rect_width")) c.rect_width = j["rect_width"].get<double>();
  if (j.contains("rect_height")) c.rect_height = j["rect_height"].get<double>();
  if (j.contains("phantom_radius")) c.phantom_radius = j["phantom_radius"].get<double>();
  if (j.contains("phantom_height")) c.phantom_height = j["phantom_height"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace rf::synth
