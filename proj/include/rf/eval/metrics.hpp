#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rf/field.hpp"

namespace rf::eval {

/// Voxel selection, always evaluated on the reference (ground-truth) grid.
///   Top(x)   t > max(t) (1 - x/100)
///   Scatter  0.005 max(t) <= t < 0.05 max(t)
struct Selector {
  enum class Kind { Top, Scatter };
  Kind kind = Kind::Top;
  double percent = 90.0;

  static Selector top(double percent) { return {Kind::Top, percent}; }
  static Selector scatter() { return {Kind::Scatter, 0.0}; }
};

std::vector<std::size_t> select_voxels(std::span<const double> t, const Selector& sel);

/// Sum of per-voxel symmetric errors |p - t| / ((|p| + |t|) / 2) over a
/// selection and its size, for pooling across fields.
struct SmapeSums {
  double error = 0.0;
  std::size_t count = 0;

  void add(const SmapeSums& o) {
    error += o.error;
    count += o.count;
  }
  /// 1 - SMAPE / 2. Throws EmptySelection when count is zero.
  double accuracy() const;
};

SmapeSums smape_sums(std::span<const double> t, std::span<const double> p, const Selector& sel);
/// Throws EmptySelection if the selector matches no voxel.
double smape_acc(std::span<const double> t, std::span<const double> p, const Selector& sel);

struct GammaCriterion {
  double delta_d_cm = 4.0;
  double delta_dose = 0.03;  // fraction of max(t)

  std::string label() const;  // e.g. "gpr_3pct_4cm"
};

/// Per-voxel gamma test: voxel x passes when some reference voxel r with
/// |x - r| <= delta_d has (|x - r| / delta_d)^2 + ((p(x) - t(r)) / delta_D)^2 <= 1,
/// delta_D = delta_dose * max(t). Neighbourhoods are clipped at the boundary.
/// Throws CriterionSmallerThanVoxel if delta_d is below the smallest voxel
/// extent.
std::vector<std::uint8_t> gamma_pass_map(std::span<const double> t, std::span<const double> p, const GridDims& dims,
                                         const std::array<float, 3>& voxel_extent, const GammaCriterion& crit);
double gpr(std::span<const double> t, std::span<const double> p, const GridDims& dims,
           const std::array<float, 3>& voxel_extent, const GammaCriterion& crit);

/// Overlap of spectra: sum min(P, T) / sum (P + T - min(P, T)) taken over all
/// bins of the voxels where `mask` is nonzero (all voxels for an empty
/// mask). `pooled = false` averages the per-voxel ratios instead.
/// Returns 1 when there is nothing to compare.
double spec_acc(std::span<const float> t_spectra, std::span<const float> p_spectra,
                std::span<const std::uint8_t> mask = {}, bool pooled = true);

/// Components of spec_acc for pooling across fields.
struct OverlapSums {
  double intersection = 0.0;
  double union_ = 0.0;

  void add(const OverlapSums& o) {
    intersection += o.intersection;
    union_ += o.union_;
  }
  double ratio() const { return union_ > 0.0 ? intersection / union_ : 1.0; }
};

OverlapSums overlap_sums(std::span<const float> t_spectra, std::span<const float> p_spectra,
                         std::span<const std::uint8_t> mask = {});

struct FieldMetrics {
  std::string name;
  double smape_acc_90 = 0.0;
  double smape_acc_scatter = 0.0;
  double ssim = 0.0;
  double gpr_3pct_6cm = 0.0;
  double gpr_10pct_4cm = 0.0;
  double gpr_3pct_4cm = 0.0;
  double gpr_10pct_6cm = 0.0;
  double spec_acc = 0.0;

  bool operator==(const FieldMetrics&) const = default;
};

struct MetricReport {
  double smape_acc_90 = 0.0;
  double smape_acc_scatter = 0.0;
  double ssim = 0.0;
  double gpr_3pct_6cm = 0.0;
  double gpr_10pct_4cm = 0.0;
  double gpr_3pct_4cm = 0.0;
  double gpr_10pct_6cm = 0.0;
  double spec_acc = 0.0;
  std::vector<FieldMetrics> fields;

  /// Aligned text table, one row of summary values.
  std::string table(const std::string& label = "model") const;

  bool operator==(const MetricReport&) const = default;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace rf::eval
