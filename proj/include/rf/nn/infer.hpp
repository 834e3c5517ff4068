#pragma once

#include <array>
#include <string>

#include "rf/field.hpp"
#include "rf/nn/model.hpp"

namespace rf::nn {

/// Model output over a whole grid in normalized space, full precision.
struct GridPrediction {
  Matrix fluence;   // N x 1
  Matrix spectrum;  // N x 32
};

/// Evaluates the model at every voxel center, `batch` voxels per forward call.
GridPrediction predict_grid(Model& model, const BeamParams& beam, const GridDims& dims, std::size_t batch = 4096);

/// Predicted field with a single "total" channel. The fluence is
/// denormalized against `fluence_max` (1 gives the relative field).
RadiationField infer_field(Model& model, const BeamParams& beam, const GridDims& dims,
                           const std::array<float, 3>& voxel_extent, std::size_t batch = 4096,
                           double fluence_max = 1.0);

struct TimingStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int reps = 0;

  /// "12.34 ms ± 0.56 ms"
  std::string format() const;
};

/// Wall-clock statistics of predict_grid over `reps` timed runs after
/// `warmup` untimed ones.
TimingStats benchmark_inference(Model& model, const BeamParams& beam, const GridDims& dims, std::size_t batch = 4096,
                                int warmup = 3, int reps = 20);

}  // namespace rf::nn
