#include "rf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rf/error.hpp"

namespace rf {
namespace {

// Pairwise summation keeps the reduction order fixed independent of how the
// caller chunks the data.
double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) return std::accumulate(v.begin(), v.end(), 0.0);
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const double mean = pairwise_sum(v) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

double dynamic_range_db(std::span<const double> values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : values) {
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi <= 0.0) throw Error(Errc::AllZeroFluence, "no positive fluence; dynamic range undefined");
  return 10.0 * std::log10(hi / lo);
}

double gini_coefficient(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyDataset, "gini of empty set");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double mu = pairwise_sum(values) / n;
  if (mu <= 0.0) throw Error(Errc::AllZeroFluence, "gini undefined for all-zero values");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    terms[i] = values[i] * (2.0 * static_cast<double>(i + 1) - n - 1.0);
  return pairwise_sum(terms) / (n * n * mu);
}

DatasetStats compute_stats(std::span<const RadiationField> fields, ChannelSet channels) {
  if (fields.empty()) throw Error(Errc::EmptyDataset, "compute_stats needs at least one field");
  std::vector<double> pooled;
  std::vector<double> energies, peaks, distances, angles;
  for (const auto& f : fields) {
    auto append = [&](const char* name) {
      const auto& ch = f.channel(name);
      pooled.insert(pooled.end(), ch.fluence.begin(), ch.fluence.end());
    };
    if (channels.beam) append("beam");
    if (channels.scatter) append("scatter");

    const auto& spec = f.meta.tube_spectrum;
    energies.push_back(mean_energy(spec, 1.0));
    std::size_t last = 0;
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (spec[i] > 0.0) last = i + 1;
    peaks.push_back(static_cast<double>(last));
    distances.push_back(f.meta.tube_distance);
    if (const auto* cone = std::get_if<ConeBeam>(&f.meta.shape))
      angles.push_back(cone->opening_angle_deg);
  }
  DatasetStats s;
  s.fields = fields.size();
  s.dr_db = dynamic_range_db(pooled);
  s.gini = gini_coefficient(std::move(pooled));
  s.mean_energy = mean_std(energies);
  s.peak_energy = mean_std(peaks);
  s.mean_distance = mean_std(distances);
  s.mean_angle = mean_std(angles);
  return s;
}

double Histogram::bin_low(std::size_t b) const {
  return lower + (upper - lower) * static_cast<double>(b) / static_cast<double>(counts.size());
}
double Histogram::bin_high(std::size_t b) const {
  return lower + (upper - lower) * static_cast<double>(b + 1) / static_cast<double>(counts.size());
}
std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram fluence_histogram(const RadiationField& field, ChannelSelect channel, double lower_cut,
                            std::size_t bins) {
  if (bins == 0) throw Error(Errc::OutOfRange, "histogram needs at least one bin");
  if (!(lower_cut >= 0.0 && lower_cut <= 1.0))
    throw Error(Errc::OutOfRange, "lower_cut must lie in [0, 1]");
  const FieldChannel ch = select_channel(field, channel);
  const float max = ch.fluence.empty() ? 0.0f : *std::max_element(ch.fluence.begin(), ch.fluence.end());
  if (!(max > 0.0f)) throw Error(Errc::AllZeroFluence, "field has no positive fluence");

  Histogram h{lower_cut, 1.0, std::vector<std::size_t>(bins, 0)};
  const double width = 1.0 - lower_cut;
  for (float v : ch.fluence) {
    const double x = static_cast<double>(v) / static_cast<double>(max);
    if (x < lower_cut) continue;
    std::size_t b = bins - 1;
    if (width > 0.0)
      b = std::min(bins - 1, static_cast<std::size_t>((x - lower_cut) / width * static_cast<double>(bins)));
    ++h.counts[b];
  }
  return h;
}

void accumulate(Histogram& into, const Histogram& other) {
  if (into.counts.size() != other.counts.size() || into.lower != other.lower)
    throw Error(Errc::DimensionMismatch, "histogram binning differs");
  for (std::size_t b = 0; b < into.counts.size(); ++b) into.counts[b] += other.counts[b];
}

}  // namespace rf
