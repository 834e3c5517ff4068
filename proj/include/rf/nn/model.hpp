#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rf/field.hpp"
#include "rf/nn/layers.hpp"
#include "rf/normalize.hpp"

namespace rf::nn {

/// SRBF: location + direction. SPERF: adds the tube spectrum. PBRF: adds the
/// tube distance as well.
enum class Variant { SRBF, SPERF, PBRF };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::SRBF;
  int width = 192;
  int L = 10;
  int l_max = 4;
  int spec_dim = 32;
  FusionKind fusion = FusionKind::FiLM;
  int depth = 3;  // hidden layers per MLP block
  NormSpec norm;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ForwardOut {
  Var fluence;   // N x 1, normalized
  Var spectrum;  // N x 32, rows sum to 1
};

/// Location-conditioned field estimator:
///   h1 = MLP1(fourier(loc)); g = global([sh(dir); spec_enc; dist_enc])
///   h = fuse2(MLP2(fuse1(h1, g)), g) + h1
///   fluence = act(Linear(h)); spectrum = norm_hist(softplus(dec(h)))
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model& other);
  Model& operator=(const Model& other);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  /// `locations` is N x 3 in the unit cube.
  ForwardOut forward(Graph& g, const Matrix& locations, const BeamParams& beam);
  /// Per-field global features (1 x width).
  Var global_features(Graph& g, const BeamParams& beam);

  /// Fixed order; names are unique.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  Parameter& parameter(const std::string& name);

  void zero_grad();
  /// Throws NonFiniteParameters if any value is NaN or infinite.
  void check_finite() const;

  Fusion& fuse1() { return fuse1_; }
  Fusion& fuse2() { return fuse2_; }
  Linear& fluence_head() { return flu_; }

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  std::vector<Linear> mlp1_;
  std::vector<Linear> mlp2_;
  Linear glob1_, glob2_;
  SpectrumEncoder spec_;
  DistanceEncoder dist_;
  Fusion fuse1_, fuse2_;
  Linear flu_;
  Linear dec1_, dec2_;
};

}  // namespace rf::nn
