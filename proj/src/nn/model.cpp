#include "rf/nn/model.hpp"

#include <cmath>

#include "rf/nn/encoders.hpp"

namespace rf::nn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SRBF: return "SRBF";
    case Variant::SPERF: return "SPERF";
    case Variant::PBRF: return "PBRF";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::SRBF, Variant::SPERF, Variant::PBRF})
    if (to_string(v) == name) return v;
  throw Error(Errc::InvalidConfig, "unknown model variant '" + name + "'");
}

void ModelConfig::validate() const {
  if (width < 2) throw Error(Errc::InvalidConfig, "width must be >= 2");
  if (L < 1) throw Error(Errc::InvalidConfig, "L must be >= 1");
  if (l_max < 1) throw Error(Errc::InvalidConfig, "l_max must be >= 1");
  if (spec_dim < 1) throw Error(Errc::InvalidConfig, "spec_dim must be >= 1");
  if (depth < 1) throw Error(Errc::InvalidConfig, "depth must be >= 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)}, {"width", c.width},     {"L", c.L},
          {"l_max", c.l_max},                {"spec_dim", c.spec_dim}, {"fusion", to_string(c.fusion)},
          {"depth", c.depth},                {"normalizer", to_json(c.norm)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("width")) c.width = j.at("width").get<int>();
    if (j.contains("L")) c.L = j.at("L").get<int>();
    if (j.contains("l_max")) c.l_max = j.at("l_max").get<int>();
    if (j.contains("spec_dim")) c.spec_dim = j.at("spec_dim").get<int>();
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("depth")) c.depth = j.at("depth").get<int>();
    if (j.contains("normalizer")) c.norm = norm_spec_from_json(j.at("normalizer"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Eigen::Index global_input_dim(const ModelConfig& c) {
  Eigen::Index d = sh_dim(c.l_max);
  if (c.variant != Variant::SRBF) d += c.spec_dim;
  if (c.variant == Variant::PBRF) d += DistanceEncoder::kWidth;
  return d;
}

Matrix row(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  Rng rng(seed);
  const Eigen::Index w = config_.width;
  const Eigen::Index enc = fourier_dim(3, config_.L);
  for (int i = 0; i < config_.depth; ++i)
    mlp1_.emplace_back("mlp1." + std::to_string(i), i == 0 ? enc : w, w, rng);
  for (int i = 0; i < config_.depth; ++i) mlp2_.emplace_back("mlp2." + std::to_string(i), w, w, rng);
  glob1_ = Linear("glob.l1", global_input_dim(config_), w, rng);
  glob2_ = Linear("glob.l2", w, w, rng);
  if (config_.variant != Variant::SRBF) spec_ = SpectrumEncoder(config_.spec_dim, rng);
  if (config_.variant == Variant::PBRF) dist_ = DistanceEncoder(rng);
  fuse1_ = Fusion("fuse1", config_.fusion, w, w, rng);
  fuse2_ = Fusion("fuse2", config_.fusion, w, w, rng);
  flu_ = Linear("fluence", w, 1, rng);
  dec1_ = Linear("spectrum.l1", w, std::max<Eigen::Index>(1, w / 2), rng);
  dec2_ = Linear("spectrum.l2", std::max<Eigen::Index>(1, w / 2), static_cast<Eigen::Index>(kFieldBins), rng);
}

// Members hold no pointers into each other, so copies are plain member copies.
Model::Model(const Model& other) = default;
Model& Model::operator=(const Model& other) = default;

Var Model::global_features(Graph& g, const BeamParams& beam) {
  Var in = g.constant(row(sh_basis(beam.direction, config_.l_max)));
  if (config_.variant != Variant::SRBF)
    in = concat_cols(in, spec_(g, g.constant(row(prepare_spectrum(beam.tube_spectrum)))));
  if (config_.variant == Variant::PBRF) {
    Matrix d(1, 1);
    d(0, 0) = scale_distance(beam.tube_distance);
    in = concat_cols(in, dist_(g, g.constant(d)));
  }
  return glob2_(g, silu(glob1_(g, in)));
}

ForwardOut Model::forward(Graph& g, const Matrix& locations, const BeamParams& beam) {
  if (locations.cols() != 3) throw Error(Errc::ShapeMismatch, "locations must be N x 3");
  check_finite();
  Var glob = global_features(g, beam);
  Var h = fourier_encode(g.constant(locations), config_.L);
  for (auto& layer : mlp1_) h = silu(layer(g, h));
  Var h1 = h;
  h = fuse1_(g, h, glob);
  for (auto& layer : mlp2_) h = silu(layer(g, h));
  h = add(fuse2_(g, h, glob), h1);

  ForwardOut out;
  Var pre = flu_(g, h);
  out.fluence = config_.norm.kind == NormKind::MaxNormSym ? clamp_gc(pre, -1.0, 1.0) : sigmoid(pre);
  out.spectrum = norm_hist(softplus(dec2_(g, silu(dec1_(g, h)))));
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : mlp1_) l.collect(out);
  glob1_.collect(out);
  glob2_.collect(out);
  if (config_.variant != Variant::SRBF) spec_.collect(out);
  if (config_.variant == Variant::PBRF) dist_.collect(out);
  fuse1_.collect(out);
  for (auto& l : mlp2_) l.collect(out);
  fuse2_.collect(out);
  flu_.collect(out);
  dec1_.collect(out);
  dec2_.collect(out);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Parameter& Model::parameter(const std::string& name) {
  for (Parameter* p : parameters())
    if (p->name == name) return *p;
  throw Error(Errc::InvalidConfig, "no parameter named '" + name + "'");
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

void Model::check_finite() const {
  for (const Parameter* p : parameters())
    if (!p->value.allFinite()) throw Error(Errc::NonFiniteParameters, "parameter " + p->name + " is not finite");
}

}  // namespace rf::nn
