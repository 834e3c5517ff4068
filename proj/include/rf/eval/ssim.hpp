#pragma once

#include <span>
#include <vector>

#include "rf/field.hpp"
#include "rf/nn/graph.hpp"

namespace rf::eval {

/// Side length of the cubic uniform SSIM window.
inline constexpr std::uint32_t kSsimWindow = 7;

/// Mean local SSIM of p against the reference t over every window that fits
/// inside the grid. C1 = (0.01 R)^2, C2 = (0.03 R)^2 with R the value range of
/// t (R = 1 when t is constant). Optionally returns d(ssim)/dp.
/// Throws GridTooSmall if an axis is shorter than the window.
double ssim3d(std::span<const double> t, std::span<const double> p, const GridDims& dims,
              std::vector<double>* grad_p = nullptr);
double ssim3d(std::span<const float> t, std::span<const float> p, const GridDims& dims);

/// Differentiable SSIM of a column of predictions (N x 1, grid order)
/// against a fixed reference.
nn::Var ssim3d(nn::Var p, const nn::Matrix& t, const GridDims& dims);

}  // namespace rf::eval
