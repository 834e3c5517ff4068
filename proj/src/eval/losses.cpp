#include "rf/eval/losses.hpp"

#include <cmath>

#include "rf/error.hpp"
#include "rf/eval/ssim.hpp"

namespace rf::eval {
namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::LengthMismatch, "histogram lengths differ");
  if (a == 0) throw Error(Errc::LengthMismatch, "empty histogram");
}

void check_shape(const nn::Matrix& p, const nn::Matrix& t) {
  if (p.rows() != t.rows() || p.cols() != t.cols())
    throw Error(Errc::DimensionMismatch, "prediction and target shapes differ");
}

}  // namespace

double wasserstein(std::span<const double> t, std::span<const double> p) {
  check_lengths(t.size(), p.size());
  double ct = 0.0, cp = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ct += t[i];
    cp += p[i];
    acc += std::abs(cp - ct);
  }
  return acc / static_cast<double>(t.size());
}

double loss_spectrum(std::span<const double> t, std::span<const double> p) {
  check_lengths(t.size(), p.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) l1 += std::abs(p[i] - t[i]);
  l1 /= static_cast<double>(t.size());
  return kSpectrumL1Weight * l1 + kSpectrumWassersteinWeight * wasserstein(t, p);
}

double loss_fluence(std::span<const double> t, std::span<const double> p, const GridDims& dims) {
  if (t.size() != p.size() || t.size() != dims.voxels())
    throw Error(Errc::DimensionMismatch, "fluence grids differ in size");
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = p[i] - t[i];
    l1 += std::abs(d);
    l2 += d * d;
  }
  const double n = static_cast<double>(t.size());
  return (l1 / n + l2 / n + (1.0 - ssim3d(t, p, dims))) / 3.0;
}

nn::Var l1_mean(nn::Var p, const nn::Matrix& t) {
  check_shape(p.value(), t);
  const nn::Matrix diff = p.value() - t;
  const double n = static_cast<double>(diff.size());
  nn::Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum() / n;
  return p.graph().make(std::move(out), {p}, [p, diff, n](nn::Graph& g, const nn::Matrix& og) {
    g.accumulate(p, diff.unaryExpr(&sign) * (og(0, 0) / n));
  });
}

nn::Var mse(nn::Var p, const nn::Matrix& t) {
  check_shape(p.value(), t);
  nn::Matrix diff = p.value() - t;
  const double n = static_cast<double>(diff.size());
  nn::Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return p.graph().make(std::move(out), {p}, [p, diff = std::move(diff), n](nn::Graph& g, const nn::Matrix& og) {
    g.accumulate(p, diff * (2.0 * og(0, 0) / n));
  });
}

nn::Var loss_fluence(nn::Var p, const nn::Matrix& t, const GridDims& dims) {
  if (static_cast<std::size_t>(p.rows()) != dims.voxels())
    throw Error(Errc::DimensionMismatch, "fluence column does not match the grid");
  nn::Var s = ssim3d(p, t, dims);
  nn::Var terms = nn::add(nn::add(l1_mean(p, t), mse(p, t)), nn::add_scalar(nn::scale(s, -1.0), 1.0));
  return nn::scale(terms, 1.0 / 3.0);
}

nn::Var loss_spectrum(nn::Var p, const nn::Matrix& t) {
  check_shape(p.value(), t);
  const nn::Matrix& pv = p.value();
  const Eigen::Index rows = pv.rows(), bins = pv.cols();
  const double norm = 1.0 / static_cast<double>(rows * bins);
  nn::Matrix sign_diff(rows, bins), sign_cum(rows, bins);
  double l1 = 0.0, w = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double cp = 0.0, ct = 0.0;
    for (Eigen::Index b = 0; b < bins; ++b) {
      const double d = pv(r, b) - t(r, b);
      l1 += std::abs(d);
      sign_diff(r, b) = sign(d);
      cp += pv(r, b);
      ct += t(r, b);
      w += std::abs(cp - ct);
      sign_cum(r, b) = sign(cp - ct);
    }
  }
  nn::Matrix out(1, 1);
  out(0, 0) = norm * (kSpectrumL1Weight * l1 + kSpectrumWassersteinWeight * w);
  return p.graph().make(
      std::move(out), {p},
      [p, norm, sign_diff = std::move(sign_diff), sign_cum = std::move(sign_cum)](nn::Graph& g, const nn::Matrix& og) {
        // d/dp_j of sum_i |C_i| is the suffix sum of the cumulative signs.
        nn::Matrix grad(sign_cum.rows(), sign_cum.cols());
        for (Eigen::Index r = 0; r < grad.rows(); ++r) {
          double suffix = 0.0;
          for (Eigen::Index b = grad.cols(); b-- > 0;) {
            suffix += sign_cum(r, b);
            grad(r, b) = kSpectrumL1Weight * sign_diff(r, b) + kSpectrumWassersteinWeight * suffix;
          }
        }
        g.accumulate(p, grad * (og(0, 0) * norm));
      });
}

}  // namespace rf::eval
