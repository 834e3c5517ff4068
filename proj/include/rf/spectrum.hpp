#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rf {

/// Upper edge of every energy axis used here, keV.
inline constexpr double kMaxEnergyKeV = 150.0;
/// Tube output spectra: 150 bins of 1 keV.
inline constexpr std::size_t kTubeBins = 150;
/// Per-voxel local spectra.
inline constexpr std::size_t kFieldBins = 32;
inline constexpr double kFieldBinWidthKeV = kMaxEnergyKeV / static_cast<double>(kFieldBins);

/// Midpoint of field bin i: (i + 0.5) * 150/32 keV.
constexpr double field_bin_mid(std::size_t i) {
  return (static_cast<double>(i) + 0.5) * kFieldBinWidthKeV;
}

/// Midpoint of tube bin i (1 keV bins).
constexpr double tube_bin_mid(std::size_t i) { return static_cast<double>(i) + 0.5; }

/// Mass-conserving rebinning of a histogram on [0, E) into `out_bins` equal
/// bins over the same interval. The cumulative distribution is interpolated
/// linearly at the new bin edges, so each output bin receives the overlapping
/// fraction of every input bin.
std::vector<double> resample_histogram(std::span<const double> src, std::size_t out_bins);

/// Copy scaled so the entries sum to one. An all-zero input stays all-zero.
std::vector<double> unit_sum(std::span<const double> hist);

/// Expectation of the bin midpoints under the (unit-sum) histogram, keV.
double mean_energy(std::span<const double> hist, double bin_width_kev);

}  // namespace rf
