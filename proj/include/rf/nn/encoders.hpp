#pragma once

#include <span>
#include <vector>

#include "rf/field.hpp"
#include "rf/nn/graph.hpp"

namespace rf::nn {

/// Columns produced for d inputs: per coordinate sin/cos pairs at
/// frequencies 2^k pi (k < L), then the raw coordinates.
inline Eigen::Index fourier_dim(Eigen::Index d, int L) { return d * (2 * L + 1); }

Matrix fourier_features(const Matrix& x, int L);
Var fourier_encode(Var x, int L);

/// Real spherical harmonics of degrees 0..l_max-1 (m = -l..l within a degree)
/// followed by the raw direction.
inline Eigen::Index sh_dim(int l_max) { return static_cast<Eigen::Index>(l_max) * l_max + 3; }

/// Throws NonUnitDirection unless |dir| = 1 within 1e-6.
std::vector<double> sh_basis(const Vec3& dir, int l_max);
/// Row-wise encoding of unit directions; differentiable w.r.t. the components.
Var sh_encode(Var dirs, int l_max);

inline constexpr std::size_t kSpectrumEncoderBins = 64;

/// Unit-sum a 150-bin tube spectrum and rebin it to 64 bins. Throws
/// NegativeBin on negative entries.
std::vector<double> prepare_spectrum(std::span<const double> tube_spectrum);

inline constexpr double kDistanceLo = 0.35;
inline constexpr double kDistanceHi = 0.75;

/// Maps the configured tube-distance range onto [0, 1]. Distances outside the
/// range are scaled the same way but emit an OutOfConfiguredRange warning.
double scale_distance(double d);

}  // namespace rf::nn
