#include "rf/eval/ssim.hpp"

#include <algorithm>
#include <array>

#include "rf/error.hpp"

namespace rf::eval {
namespace {

using Dims = std::array<std::size_t, 3>;
constexpr std::size_t kW = kSsimWindow;

std::size_t stride(const Dims& d, int axis) { return axis == 0 ? 1 : axis == 1 ? d[0] : d[0] * d[1]; }

// Window sums along one axis; that axis shrinks by kW - 1.
std::vector<double> slide(const std::vector<double>& in, const Dims& d, int axis) {
  Dims o = d;
  o[axis] -= kW - 1;
  std::vector<double> out(o[0] * o[1] * o[2]);
  const std::size_t si = stride(d, axis);
  for (std::size_t k = 0; k < o[2]; ++k)
    for (std::size_t j = 0; j < o[1]; ++j)
      for (std::size_t i = 0; i < o[0]; ++i) {
        const std::size_t src = i + d[0] * (j + d[1] * k);
        double acc = 0.0;
        for (std::size_t w = 0; w < kW; ++w) acc += in[src + w * si];
        out[i + o[0] * (j + o[1] * k)] = acc;
      }
  return out;
}

// Adjoint of `slide`: spreads each window value back over its inputs.
std::vector<double> slide_adjoint(const std::vector<double>& g, const Dims& o, int axis) {
  Dims d = o;
  d[axis] += kW - 1;
  std::vector<double> out(d[0] * d[1] * d[2], 0.0);
  const std::size_t si = stride(d, axis);
  for (std::size_t k = 0; k < o[2]; ++k)
    for (std::size_t j = 0; j < o[1]; ++j)
      for (std::size_t i = 0; i < o[0]; ++i) {
        const double v = g[i + o[0] * (j + o[1] * k)];
        const std::size_t dst = i + d[0] * (j + d[1] * k);
        for (std::size_t w = 0; w < kW; ++w) out[dst + w * si] += v;
      }
  return out;
}

std::vector<double> box(std::vector<double> v, Dims d) {
  for (int axis = 0; axis < 3; ++axis) {
    v = slide(v, d, axis);
    d[axis] -= kW - 1;
  }
  return v;
}

std::vector<double> box_adjoint(std::vector<double> g, Dims o) {
  for (int axis = 2; axis >= 0; --axis) {
    g = slide_adjoint(g, o, axis);
    o[axis] += kW - 1;
  }
  return g;
}

}  // namespace

double ssim3d(std::span<const double> t, std::span<const double> p, const GridDims& dims,
              std::vector<double>* grad_p) {
  const std::size_t n = dims.voxels();
  if (t.size() != n || p.size() != n) throw Error(Errc::DimensionMismatch, "ssim3d: grid sizes differ");
  for (auto a : dims.n)
    if (a < kSsimWindow) throw Error(Errc::GridTooSmall, "ssim3d needs at least 7 voxels per axis");
  const Dims d{dims.n[0], dims.n[1], dims.n[2]};
  const Dims o{d[0] - kW + 1, d[1] - kW + 1, d[2] - kW + 1};

  const auto [tmin, tmax] = std::minmax_element(t.begin(), t.end());
  double range = *tmax - *tmin;
  if (!(range > 0.0)) range = 1.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  std::vector<double> vt(t.begin(), t.end()), vp(p.begin(), p.end());
  std::vector<double> vtt(n), vpp(n), vtp(n);
  for (std::size_t i = 0; i < n; ++i) {
    vtt[i] = t[i] * t[i];
    vpp[i] = p[i] * p[i];
    vtp[i] = t[i] * p[i];
  }
  const double inv = 1.0 / static_cast<double>(kW * kW * kW);
  auto mean_of = [&](const std::vector<double>& v) {
    auto s = box(v, d);
    for (double& x : s) x *= inv;
    return s;
  };
  const auto mt = mean_of(vt), mp = mean_of(vp), qt = mean_of(vtt), qp = mean_of(vpp), ctp = mean_of(vtp);

  const std::size_t m = mt.size();
  std::vector<double> ga, gb, gc;
  if (grad_p) {
    ga.resize(m);
    gb.resize(m);
    gc.resize(m);
  }
  double total = 0.0;
  for (std::size_t w = 0; w < m; ++w) {
    const double a1 = 2.0 * mt[w] * mp[w] + c1;
    const double a2 = 2.0 * (ctp[w] - mt[w] * mp[w]) + c2;
    const double b1 = mt[w] * mt[w] + mp[w] * mp[w] + c1;
    const double b2 = (qt[w] - mt[w] * mt[w]) + (qp[w] - mp[w] * mp[w]) + c2;
    const double den = b1 * b2;
    const double s = (a1 * a2) / den;
    total += s;
    if (grad_p) {
      ga[w] = (2.0 * mt[w] * a2 - 2.0 * mt[w] * a1) / den - s * (2.0 * mp[w] / b1 - 2.0 * mp[w] / b2);
      gb[w] = -s / b2;
      gc[w] = 2.0 * a1 / den;
    }
  }
  const double value = total / static_cast<double>(m);

  if (grad_p) {
    const double k = inv / static_cast<double>(m);
    const auto ba = box_adjoint(std::move(ga), o);
    const auto bb = box_adjoint(std::move(gb), o);
    const auto bc = box_adjoint(std::move(gc), o);
    grad_p->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*grad_p)[i] = k * (ba[i] + 2.0 * p[i] * bb[i] + t[i] * bc[i]);
  }
  return value;
}

double ssim3d(std::span<const float> t, std::span<const float> p, const GridDims& dims) {
  std::vector<double> td(t.begin(), t.end()), pd(p.begin(), p.end());
  return ssim3d(std::span<const double>(td), std::span<const double>(pd), dims);
}

nn::Var ssim3d(nn::Var p, const nn::Matrix& t, const GridDims& dims) {
  if (p.cols() != 1 || t.cols() != 1 || p.rows() != t.rows())
    throw Error(Errc::DimensionMismatch, "ssim3d expects matching N x 1 columns");
  const std::span<const double> ts(t.data(), static_cast<std::size_t>(t.size()));
  const std::span<const double> ps(p.value().data(), static_cast<std::size_t>(p.value().size()));
  std::vector<double> grad;
  nn::Matrix out(1, 1);
  out(0, 0) = ssim3d(ts, ps, dims, p.graph().needs_grad(p) ? &grad : nullptr);
  return p.graph().make(std::move(out), {p}, [p, grad = std::move(grad)](nn::Graph& g, const nn::Matrix& og) {
    g.accumulate(p, og(0, 0) * Eigen::Map<const nn::Matrix>(grad.data(), static_cast<Eigen::Index>(grad.size()), 1));
  });
}

}  // namespace rf::eval
