#pragma once

#include <random>
#include <string>
#include <vector>

#include "rf/nn/graph.hpp"

namespace rf::nn {

using Rng = std::mt19937_64;

/// Xavier-uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

struct Linear {
  Parameter w;  // in x out
  Parameter b;  // 1 x out

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);

  Eigen::Index in() const { return w.value.rows(); }
  Eigen::Index out() const { return w.value.cols(); }
  Var operator()(Graph& g, Var x) { return linear(x, g.param(w), g.param(b)); }
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  Parameter gain;
  Parameter bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index width);

  Var operator()(Graph& g, Var x) { return layer_norm(x, g.param(gain), g.param(bias)); }
  void collect(std::vector<Parameter*>& out);
};

enum class FusionKind { Concat, FiLM, ResFiLM, GMU };

std::string to_string(FusionKind kind);
FusionKind parse_fusion(const std::string& name);

/// Combines per-voxel features h (N x width) with global features g (1 x gdim
/// or N x gdim).
///   Concat   [h; g] W + b
///   FiLM     h * gamma(g) + beta(g)
///   ResFiLM  h + FiLM(h, g)
///   GMU      z * tanh(h W_h) + (1 - z) * tanh(g W_g), z = sigmoid([h; g] W_z)
/// FiLM starts as the identity (gamma = 1, beta = 0); ResFiLM starts with
/// gamma = 0 so it is the identity as well.
class Fusion {
 public:
  Fusion() = default;
  Fusion(const std::string& name, FusionKind kind, Eigen::Index width, Eigen::Index gdim, Rng& rng);

  Var operator()(Graph& g, Var h, Var glob);
  void collect(std::vector<Parameter*>& out);

  FusionKind kind() const { return kind_; }
  Eigen::Index width() const { return width_; }

  // Exposed for tests that pin the modulation.
  Linear a;  // Concat: h-part | FiLM: gamma | GMU: W_h
  Linear b;  // Concat: g-part | FiLM: beta  | GMU: W_g
  Linear zh;  // GMU gate, h-part
  Linear zg;  // GMU gate, g-part

 private:
  FusionKind kind_ = FusionKind::FiLM;
  Eigen::Index width_ = 0;
};

/// Tube spectrum (64 prepared bins) -> Linear(32) -> LayerNorm -> SiLU -> Linear(spec_dim).
struct SpectrumEncoder {
  Linear l1;
  LayerNorm ln;
  Linear l2;

  SpectrumEncoder() = default;
  SpectrumEncoder(Eigen::Index spec_dim, Rng& rng);

  Var operator()(Graph& g, Var prepared);
  void collect(std::vector<Parameter*>& out);
};

/// Scaled tube distance -> Linear(16) -> SiLU -> Linear(16).
struct DistanceEncoder {
  static constexpr Eigen::Index kWidth = 16;
  Linear l1;
  Linear l2;

  DistanceEncoder() = default;
  explicit DistanceEncoder(Rng& rng);

  Var operator()(Graph& g, Var scaled_distance);
  void collect(std::vector<Parameter*>& out);
};

}  // namespace rf::nn
