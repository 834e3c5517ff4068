#pragma once

#include <span>
#include <string>

#include "json.hpp"

namespace rf {

enum class NormKind { MaxNorm01, MaxNormSym, MaxLogNorm };

/// Kind plus the log scale alpha; the part of a normalizer that is fixed at
/// model-configuration time and stored in checkpoints.
struct NormSpec {
  NormKind kind = NormKind::MaxNorm01;
  double alpha = 1.0;

  std::string name() const;
  static NormSpec parse(const std::string& name);
  /// Lower end of the normalized range (0, or -1 for MaxNormSym).
  double lower() const { return kind == NormKind::MaxNormSym ? -1.0 : 0.0; }

  bool operator==(const NormSpec&) const = default;
};

nlohmann::json to_json(const NormSpec& spec);
NormSpec norm_spec_from_json(const nlohmann::json& j);

/// Per-field fluence scaling:
///   MaxNorm01   x / max
///   MaxNormSym  2 x / max - 1
///   MaxLogNorm  ln(1 + a x) / ln(1 + a max)
/// Inputs above the fitted max go through the same formula and map above 1.
class Normalizer {
 public:
  /// Captures max(values). Throws AllZero when no value is positive.
  static Normalizer fit(NormSpec spec, std::span<const double> values);
  static Normalizer fit(NormSpec spec, std::span<const float> values);
  /// Normalizer for an already-known maximum.
  static Normalizer with_max(NormSpec spec, double max);

  double normalize(double x) const;
  double denormalize(double y) const;

  /// The same formulas evaluated in single precision, as a float32 training
  /// pipeline would. Used to show where the log transform stops being
  /// invertible.
  float normalize_f32(float x) const;
  float denormalize_f32(float y) const;

  const NormSpec& spec() const { return spec_; }
  double max() const { return max_; }
  double log_max() const { return log_max_; }

 private:
  Normalizer(NormSpec spec, double max);

  NormSpec spec_;
  double max_ = 1.0;
  double log_max_ = 0.0;
};

}  // namespace rf
