#include "rf/spectrum.hpp"

#include <algorithm>
#include <numeric>

namespace rf {

std::vector<double> resample_histogram(std::span<const double> src, std::size_t out_bins) {
  std::vector<double> out(out_bins, 0.0);
  if (src.empty() || out_bins == 0) return out;
  const double n_in = static_cast<double>(src.size());
  const double scale = n_in / static_cast<double>(out_bins);  // input bins per output bin
  for (std::size_t j = 0; j < out_bins; ++j) {
    const double lo = static_cast<double>(j) * scale;
    const double hi = (j + 1 == out_bins) ? n_in : static_cast<double>(j + 1) * scale;
    const auto first = static_cast<std::size_t>(lo);
    double acc = 0.0;
    for (std::size_t k = first; k < src.size() && static_cast<double>(k) < hi; ++k) {
      const double overlap =
          std::min(hi, static_cast<double>(k + 1)) - std::max(lo, static_cast<double>(k));
      if (overlap > 0.0) acc += src[k] * overlap;
    }
    out[j] = acc;
  }
  return out;
}

std::vector<double> unit_sum(std::span<const double> hist) {
  std::vector<double> out(hist.begin(), hist.end());
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0)
    for (double& v : out) v /= total;
  return out;
}

double mean_energy(std::span<const double> hist, double bin_width_kev) {
  double mass = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    mass += hist[i];
    moment += hist[i] * (static_cast<double>(i) + 0.5) * bin_width_kev;
  }
  return mass > 0.0 ? moment / mass : 0.0;
}

}  // namespace rf
