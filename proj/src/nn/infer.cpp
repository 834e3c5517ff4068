#include "rf/nn/infer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "rf/normalize.hpp"

namespace rf::nn {

GridPrediction predict_grid(Model& model, const BeamParams& beam, const GridDims& dims, std::size_t batch) {
  const std::size_t n = dims.voxels();
  if (n == 0) throw Error(Errc::DimensionMismatch, "grid has zero voxels");
  if (batch == 0) batch = n;
  GridPrediction out;
  out.fluence.resize(static_cast<Eigen::Index>(n), 1);
  out.spectrum.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFieldBins));
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    Matrix loc(static_cast<Eigen::Index>(count), 3);
    for (std::size_t i = 0; i < count; ++i) {
      const Vec3 c = dims.unit_center(start + i);
      for (int k = 0; k < 3; ++k) loc(static_cast<Eigen::Index>(i), k) = c[k];
    }
    Graph g(false);
    ForwardOut f = model.forward(g, loc, beam);
    const auto s = static_cast<Eigen::Index>(start);
    const auto c = static_cast<Eigen::Index>(count);
    out.fluence.middleRows(s, c) = f.fluence.value();
    out.spectrum.middleRows(s, c) = f.spectrum.value();
  }
  return out;
}

RadiationField infer_field(Model& model, const BeamParams& beam, const GridDims& dims,
                           const std::array<float, 3>& voxel_extent, std::size_t batch, double fluence_max) {
  const GridPrediction p = predict_grid(model, beam, dims, batch);
  const Normalizer norm = Normalizer::with_max(model.config().norm, fluence_max);
  const std::size_t n = dims.voxels();
  RadiationField field;
  field.dims = dims;
  field.voxel_extent = voxel_extent;
  field.geometry.assign(n, 0);
  field.meta = beam;
  FieldChannel ch = make_channel("total", n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto r = static_cast<Eigen::Index>(v);
    ch.fluence[v] = static_cast<float>(std::max(0.0, norm.denormalize(p.fluence(r, 0))));
    for (std::size_t b = 0; b < kFieldBins; ++b)
      ch.spectra[v * kFieldBins + b] = static_cast<float>(p.spectrum(r, static_cast<Eigen::Index>(b)));
  }
  field.channels.push_back(std::move(ch));
  return field;
}

std::string TimingStats::format() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ms \xC2\xB1 %.2f ms", mean_ms, std_ms);
  return buf;
}

TimingStats benchmark_inference(Model& model, const BeamParams& beam, const GridDims& dims, std::size_t batch,
                                int warmup, int reps) {
  if (reps < 2) throw Error(Errc::InvalidConfig, "benchmark needs at least 2 timed runs");
  for (int i = 0; i < warmup; ++i) predict_grid(model, beam, dims, batch);
  std::vector<double> ms;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    predict_grid(model, beam, dims, batch);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  TimingStats st;
  st.reps = reps;
  for (double v : ms) st.mean_ms += v;
  st.mean_ms /= reps;
  for (double v : ms) st.std_ms += (v - st.mean_ms) * (v - st.mean_ms);
  st.std_ms = std::sqrt(st.std_ms / (reps - 1));
  return st;
}

}  // namespace rf::nn
