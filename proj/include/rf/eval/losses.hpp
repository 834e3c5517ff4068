#pragma once

#include <span>

#include "rf/field.hpp"
#include "rf/nn/graph.hpp"

namespace rf::eval {

/// (1/n) sum |cumsum(p) - cumsum(t)|. Throws LengthMismatch.
double wasserstein(std::span<const double> t, std::span<const double> p);

/// 0.3 mean|p - t| + 0.7 wasserstein(t, p) for one histogram pair.
double loss_spectrum(std::span<const double> t, std::span<const double> p);

/// (mean|p - t| + mean (p - t)^2 + (1 - ssim3d(t, p))) / 3 on normalized grids.
double loss_fluence(std::span<const double> t, std::span<const double> p, const GridDims& dims);

inline constexpr double kSpectrumL1Weight = 0.3;
inline constexpr double kSpectrumWassersteinWeight = 0.7;

// Graph versions. Targets are constants; p is differentiable.

nn::Var l1_mean(nn::Var p, const nn::Matrix& t);
nn::Var mse(nn::Var p, const nn::Matrix& t);
/// Column of normalized fluences (N x 1, grid order).
nn::Var loss_fluence(nn::Var p, const nn::Matrix& t, const GridDims& dims);
/// Row-wise histograms (N x bins): the per-row loss averaged over rows.
nn::Var loss_spectrum(nn::Var p, const nn::Matrix& t);

}  // namespace rf::eval
