#pragma once

#include <span>
#include <vector>

#include "rf/field.hpp"

namespace rf {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct DatasetStats {
  double dr_db = 0.0;  // 10 log10(max / min positive fluence)
  double gini = 0.0;   // in [0, 1]
  MeanStd mean_energy;     // keV, tube spectrum expectation
  MeanStd peak_energy;     // keV, upper edge of the highest populated tube bin
  MeanStd mean_distance;   // m
  MeanStd mean_angle;      // deg, cone beams only; NaN when no cone beams
  std::size_t fields = 0;
};

/// Which channels' fluences are pooled into the DR/Gini statistics.
struct ChannelSet {
  bool beam = true;
  bool scatter = true;
};

/// 10 log10(max/min) over the strictly positive entries.
double dynamic_range_db(std::span<const double> values);
/// Gini coefficient with values sorted ascending and 1-based ranks.
double gini_coefficient(std::vector<double> values);

DatasetStats compute_stats(std::span<const RadiationField> fields, ChannelSet channels = {});

struct Histogram {
  double lower = 0.0;
  double upper = 1.0;
  std::vector<std::size_t> counts;

  double bin_low(std::size_t b) const;
  double bin_high(std::size_t b) const;
  std::size_t total() const;
};

/// MaxNorm-scaled fluences binned over [lower_cut, 1].
Histogram fluence_histogram(const RadiationField& field, ChannelSelect channel, double lower_cut,
                            std::size_t bins);

/// Sum of two histograms with identical binning.
void accumulate(Histogram& into, const Histogram& other);

}  // namespace rf
