#include "rf/nn/layers.hpp"

#include <cmath>

namespace rf::nn {
namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = a * (2.0 * uniform01(rng) - 1.0);
  return m;
}

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
  w.name = name + ".w";
  w.value = xavier_uniform(in, out, rng);
  b.name = name + ".b";
  b.value = Matrix::Zero(1, out);
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, Eigen::Index width) {
  gain.name = name + ".gain";
  gain.value = Matrix::Ones(1, width);
  bias.name = name + ".bias";
  bias.value = Matrix::Zero(1, width);
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::Concat: return "Concat";
    case FusionKind::FiLM: return "FiLM";
    case FusionKind::ResFiLM: return "ResFiLM";
    case FusionKind::GMU: return "GMU";
  }
  return "?";
}

FusionKind parse_fusion(const std::string& name) {
  for (FusionKind k : {FusionKind::Concat, FusionKind::FiLM, FusionKind::ResFiLM, FusionKind::GMU})
    if (to_string(k) == name) return k;
  throw Error(Errc::InvalidConfig, "unknown fusion kind '" + name + "'");
}

Fusion::Fusion(const std::string& name, FusionKind kind, Eigen::Index width, Eigen::Index gdim, Rng& rng)
    : kind_(kind), width_(width) {
  switch (kind) {
    case FusionKind::Concat: {
      // One projection of [h; g], stored as its two row blocks.
      Matrix w = xavier_uniform(width + gdim, width, rng);
      a = Linear(name + ".h", width, width, rng);
      b = Linear(name + ".g", gdim, width, rng);
      a.w.value = w.topRows(width);
      b.w.value = w.bottomRows(gdim);
      a.b.value.setZero();
      break;
    }
    case FusionKind::FiLM:
    case FusionKind::ResFiLM:
      a = Linear(name + ".gamma", gdim, width, rng);
      b = Linear(name + ".beta", gdim, width, rng);
      a.w.value.setZero();
      a.b.value.setConstant(kind == FusionKind::FiLM ? 1.0 : 0.0);
      b.w.value.setZero();
      break;
    case FusionKind::GMU: {
      a = Linear(name + ".wh", width, width, rng);
      b = Linear(name + ".wg", gdim, width, rng);
      Matrix wz = xavier_uniform(width + gdim, width, rng);
      zh = Linear(name + ".zh", width, width, rng);
      zg = Linear(name + ".zg", gdim, width, rng);
      zh.w.value = wz.topRows(width);
      zg.w.value = wz.bottomRows(gdim);
      break;
    }
  }
}

Var Fusion::operator()(Graph& g, Var h, Var glob) {
  if (h.cols() != width_) throw Error(Errc::WidthMismatch, "fusion input width differs from model width");
  switch (kind_) {
    case FusionKind::Concat:
      // The g-part bias is kept, the h-part bias is unused (zero).
      return add(matmul(h, g.param(a.w)), b(g, glob));
    case FusionKind::FiLM:
      return add(mul(h, a(g, glob)), b(g, glob));
    case FusionKind::ResFiLM:
      return add(h, add(mul(h, a(g, glob)), b(g, glob)));
    case FusionKind::GMU: {
      Var z = sigmoid(add(matmul(h, g.param(zh.w)), zg(g, glob)));
      Var th = tanh(a(g, h));
      Var tg = tanh(b(g, glob));
      // z * th + (1 - z) * tg = tg + z * (th - tg)
      return add(tg, mul(z, sub(th, tg)));
    }
  }
  throw Error(Errc::InvalidConfig, "bad fusion kind");
}

void Fusion::collect(std::vector<Parameter*>& out) {
  switch (kind_) {
    case FusionKind::Concat:
      out.push_back(&a.w);
      b.collect(out);
      break;
    case FusionKind::FiLM:
    case FusionKind::ResFiLM:
      a.collect(out);
      b.collect(out);
      break;
    case FusionKind::GMU:
      a.collect(out);
      b.collect(out);
      out.push_back(&zh.w);
      zg.collect(out);
      break;
  }
}

SpectrumEncoder::SpectrumEncoder(Eigen::Index spec_dim, Rng& rng)
    : l1("spec.l1", 64, 32, rng), ln("spec.ln", 32), l2("spec.l2", 32, spec_dim, rng) {}

Var SpectrumEncoder::operator()(Graph& g, Var prepared) { return l2(g, silu(ln(g, l1(g, prepared)))); }

void SpectrumEncoder::collect(std::vector<Parameter*>& out) {
  l1.collect(out);
  ln.collect(out);
  l2.collect(out);
}

DistanceEncoder::DistanceEncoder(Rng& rng) : l1("dist.l1", 1, kWidth, rng), l2("dist.l2", kWidth, kWidth, rng) {}

Var DistanceEncoder::operator()(Graph& g, Var scaled_distance) { return l2(g, silu(l1(g, scaled_distance))); }

void DistanceEncoder::collect(std::vector<Parameter*>& out) {
  l1.collect(out);
  l2.collect(out);
}

}  // namespace rf::nn
