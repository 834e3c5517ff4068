#include "rf/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rf/error.hpp"

namespace rf {

std::string NormSpec::name() const {
  switch (kind) {
    case NormKind::MaxNorm01: return "MaxNorm01";
    case NormKind::MaxNormSym: return "MaxNormSym";
    case NormKind::MaxLogNorm: {
      std::ostringstream ss;
      ss << "MaxLogNorm(" << alpha << ")";
      return ss.str();
    }
  }
  return "?";
}

NormSpec NormSpec::parse(const std::string& name) {
  if (name == "MaxNorm01") return {NormKind::MaxNorm01, 1.0};
  if (name == "MaxNormSym") return {NormKind::MaxNormSym, 1.0};
  if (name.rfind("MaxLogNorm(", 0) == 0 && name.back() == ')') {
    const double a = std::stod(name.substr(11, name.size() - 12));
    if (!(a > 0.0)) throw Error(Errc::InvalidConfig, "MaxLogNorm alpha must be positive");
    return {NormKind::MaxLogNorm, a};
  }
  throw Error(Errc::InvalidConfig, "unknown normalizer '" + name + "'");
}

nlohmann::json to_json(const NormSpec& spec) {
  const char* kind = spec.kind == NormKind::MaxNorm01    ? "MaxNorm01"
                     : spec.kind == NormKind::MaxNormSym ? "MaxNormSym"
                                                         : "MaxLogNorm";
  return {{"kind", kind}, {"alpha", spec.alpha}};
}

NormSpec norm_spec_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  NormSpec s;
  if (kind == "MaxNorm01") s.kind = NormKind::MaxNorm01;
  else if (kind == "MaxNormSym") s.kind = NormKind::MaxNormSym;
  else if (kind == "MaxLogNorm") s.kind = NormKind::MaxLogNorm;
  else throw Error(Errc::InvalidConfig, "unknown normalizer kind '" + kind + "'");
  s.alpha = j.value("alpha", 1.0);
  if (!(s.alpha > 0.0)) throw Error(Errc::InvalidConfig, "alpha must be positive");
  return s;
}

Normalizer::Normalizer(NormSpec spec, double max) : spec_(spec), max_(max) {
  if (!(max > 0.0) || !std::isfinite(max)) throw Error(Errc::AllZero, "normalizer max must be > 0");
  log_max_ = std::log(1.0 + spec_.alpha * max_);
}

Normalizer Normalizer::with_max(NormSpec spec, double max) { return Normalizer(spec, max); }

Normalizer Normalizer::fit(NormSpec spec, std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  if (!(m > 0.0)) throw Error(Errc::AllZero, "cannot fit a normalizer to all-zero values");
  return Normalizer(spec, m);
}

Normalizer Normalizer::fit(NormSpec spec, std::span<const float> values) {
  double m = 0.0;
  for (float v : values) m = std::max(m, static_cast<double>(v));
  if (!(m > 0.0)) throw Error(Errc::AllZero, "cannot fit a normalizer to all-zero values");
  return Normalizer(spec, m);
}

double Normalizer::normalize(double x) const {
  if (x < 0.0) throw Error(Errc::NegativeInput, "fluence must be non-negative");
  switch (spec_.kind) {
    case NormKind::MaxNorm01: return x / max_;
    case NormKind::MaxNormSym: return 2.0 * (x / max_) - 1.0;
    case NormKind::MaxLogNorm: return std::log(1.0 + spec_.alpha * x) / log_max_;
  }
  return 0.0;
}

double Normalizer::denormalize(double y) const {
  if (!std::isfinite(y) || y < spec_.lower() - 1e-12)
    throw Error(Errc::OutOfRange, "normalized value below the normalizer's range");
  switch (spec_.kind) {
    case NormKind::MaxNorm01: return std::max(0.0, y) * max_;
    case NormKind::MaxNormSym: return std::max(0.0, (y + 1.0) * 0.5) * max_;
    case NormKind::MaxLogNorm: return std::max(0.0, (std::exp(y * log_max_) - 1.0) / spec_.alpha);
  }
  return 0.0;
}

float Normalizer::normalize_f32(float x) const {
  const float mx = static_cast<float>(max_);
  const float a = static_cast<float>(spec_.alpha);
  switch (spec_.kind) {
    case NormKind::MaxNorm01: return x / mx;
    case NormKind::MaxNormSym: return 2.0f * (x / mx) - 1.0f;
    case NormKind::MaxLogNorm: return std::log(1.0f + a * x) / std::log(1.0f + a * mx);
  }
  return 0.0f;
}

float Normalizer::denormalize_f32(float y) const {
  const float mx = static_cast<float>(max_);
  const float a = static_cast<float>(spec_.alpha);
  switch (spec_.kind) {
    case NormKind::MaxNorm01: return y * mx;
    case NormKind::MaxNormSym: return (y + 1.0f) * 0.5f * mx;
    case NormKind::MaxLogNorm: return (std::exp(y * std::log(1.0f + a * mx)) - 1.0f) / a;
  }
  return 0.0f;
}

}  // namespace rf
