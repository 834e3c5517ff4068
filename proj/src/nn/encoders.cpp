#include "rf/nn/encoders.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rf::nn {
namespace {

// Value plus partials w.r.t. x, y, z.
struct Dual {
  double v = 0.0;
  std::array<double, 3> d{0.0, 0.0, 0.0};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator*(double s, const Dual& a) {
  Dual r(s * a.v);
  for (int i = 0; i < 3; ++i) r.d[i] = s * a.d[i];
  return r;
}

double factorial_ratio(int l, int m) {  // (l-m)! / (l+m)!
  double r = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) r /= k;
  return r;
}

// Writes l_max^2 coefficients.
template <class T>
void sh_eval(const T& x, const T& y, const T& z, int l_max, T* out) {
  std::vector<T> c(l_max), s(l_max), p(l_max);
  c[0] = T(1.0);
  s[0] = T(0.0);
  for (int m = 1; m < l_max; ++m) {
    c[m] = x * c[m - 1] - y * s[m - 1];
    s[m] = x * s[m - 1] + y * c[m - 1];
  }
  double pmm = 1.0;  // (-1)^m (2m-1)!!
  for (int m = 0; m < l_max; ++m) {
    if (m > 0) pmm *= -(2.0 * m - 1.0);
    p[m] = T(pmm);
    if (m + 1 < l_max) p[m + 1] = (pmm * (2.0 * m + 1.0)) * z;
    for (int l = m + 2; l < l_max; ++l)
      p[l] = (1.0 / (l - m)) * ((2.0 * l - 1.0) * (z * p[l - 1]) - static_cast<double>(l + m - 1) * p[l - 2]);
    for (int l = m; l < l_max; ++l) {
      const double k = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * factorial_ratio(l, m));
      const int centre = l * l + l;
      if (m == 0) {
        out[centre] = k * p[l];
      } else {
        out[centre + m] = (std::numbers::sqrt2 * k) * (c[m] * p[l]);
        out[centre - m] = (std::numbers::sqrt2 * k) * (s[m] * p[l]);
      }
    }
  }
}

}  // namespace

Matrix fourier_features(const Matrix& x, int L) {
  if (L < 1) throw Error(Errc::InvalidConfig, "fourier_encode: L must be >= 1");
  const Eigen::Index d = x.cols();
  Matrix out(x.rows(), fourier_dim(d, L));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      double f = std::numbers::pi;
      for (int k = 0; k < L; ++k, f *= 2.0) {
        out(r, c * 2 * L + 2 * k) = std::sin(f * x(r, c));
        out(r, c * 2 * L + 2 * k + 1) = std::cos(f * x(r, c));
      }
      out(r, d * 2 * L + c) = x(r, c);
    }
  }
  return out;
}

Var fourier_encode(Var x, int L) {
  Matrix out = fourier_features(x.value(), L);
  return x.graph().make(out, {x}, [x, L, y = out](Graph& g, const Matrix& og) {
    const Eigen::Index d = x.cols();
    Matrix dx(x.rows(), d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        double acc = og(r, d * 2 * L + c);
        double f = std::numbers::pi;
        for (int k = 0; k < L; ++k, f *= 2.0) {
          const Eigen::Index base = c * 2 * L + 2 * k;
          acc += og(r, base) * f * y(r, base + 1) - og(r, base + 1) * f * y(r, base);
        }
        dx(r, c) = acc;
      }
    }
    g.accumulate(x, dx);
  });
}

std::vector<double> sh_basis(const Vec3& dir, int l_max) {
  if (l_max < 1) throw Error(Errc::InvalidConfig, "sh_encode: l_max must be >= 1");
  const double n = norm(dir);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    std::ostringstream msg;
    msg << "direction norm " << n << " differs from 1";
    throw Error(Errc::NonUnitDirection, msg.str());
  }
  std::vector<double> out(static_cast<std::size_t>(sh_dim(l_max)));
  sh_eval(dir[0], dir[1], dir[2], l_max, out.data());
  const std::size_t base = static_cast<std::size_t>(l_max) * l_max;
  for (int i = 0; i < 3; ++i) out[base + i] = dir[i];
  return out;
}

Var sh_encode(Var dirs, int l_max) {
  if (l_max < 1) throw Error(Errc::InvalidConfig, "sh_encode: l_max must be >= 1");
  if (dirs.cols() != 3) throw Error(Errc::ShapeMismatch, "sh_encode expects 3 columns");
  const Eigen::Index rows = dirs.rows();
  const int nb = l_max * l_max;
  Matrix out(rows, sh_dim(l_max));
  // d out / d x_i for every coefficient, stored per row as [coef][3].
  Matrix jac(rows, 3 * nb);
  std::vector<Dual> buf(static_cast<std::size_t>(nb));
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (std::abs(dirs.value().row(r).norm() - 1.0) > 1e-6)
      throw Error(Errc::NonUnitDirection, "direction must have unit length");
    Dual x(dirs.value()(r, 0)), y(dirs.value()(r, 1)), z(dirs.value()(r, 2));
    x.d[0] = 1.0;
    y.d[1] = 1.0;
    z.d[2] = 1.0;
    sh_eval(x, y, z, l_max, buf.data());
    for (int i = 0; i < nb; ++i) {
      out(r, i) = buf[i].v;
      for (int k = 0; k < 3; ++k) jac(r, 3 * i + k) = buf[i].d[k];
    }
    for (int k = 0; k < 3; ++k) out(r, nb + k) = dirs.value()(r, k);
  }
  return dirs.graph().make(std::move(out), {dirs}, [dirs, nb, jac = std::move(jac)](Graph& g, const Matrix& og) {
    Matrix dx(og.rows(), 3);
    for (Eigen::Index r = 0; r < og.rows(); ++r) {
      for (int k = 0; k < 3; ++k) {
        double acc = og(r, nb + k);
        for (int i = 0; i < nb; ++i) acc += og(r, i) * jac(r, 3 * i + k);
        dx(r, k) = acc;
      }
    }
    g.accumulate(dirs, dx);
  });
}

std::vector<double> prepare_spectrum(std::span<const double> tube_spectrum) {
  for (double v : tube_spectrum)
    if (v < 0.0 || !std::isfinite(v)) throw Error(Errc::NegativeBin, "tube spectrum has a negative or non-finite bin");
  return resample_histogram(unit_sum(tube_spectrum), kSpectrumEncoderBins);
}

double scale_distance(double d) {
  if (d < kDistanceLo || d > kDistanceHi) {
    std::ostringstream msg;
    msg << "OutOfConfiguredRange: tube distance " << d << " m outside [" << kDistanceLo << ", " << kDistanceHi << "]";
    warn(msg.str());
  }
  return (d - kDistanceLo) / (kDistanceHi - kDistanceLo);
}

}  // namespace rf::nn
