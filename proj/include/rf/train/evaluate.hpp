#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rf/eval/metrics.hpp"
#include "rf/field.hpp"
#include "rf/kerma.hpp"
#include "rf/nn/model.hpp"

namespace rf::train {

struct EvalOptions {
  KermaCoefficients coeffs = KermaCoefficients::unit();
  std::size_t batch = 4096;
  bool pooled_spec_acc = true;
};

/// Metrics of predicted fields against ground truth, both compared on their
/// total-channel kerma. SMAPE, GPR and Spec_acc pool voxels across fields;
/// SSIM is the mean over fields. `names` labels the per-field rows.
eval::MetricReport evaluate_fields(std::span<const RadiationField> truth, std::span<const RadiationField> pred,
                                   const EvalOptions& opts = {}, std::span<const std::string> names = {});

/// Runs the model on every test field (beam parameters from the field's
/// metadata), rescales the prediction to the field's own maximum fluence and
/// scores it.
eval::MetricReport evaluate(nn::Model& model, const std::vector<std::filesystem::path>& test_paths,
                            const EvalOptions& opts = {});
eval::MetricReport evaluate(nn::Model& model, std::span<const RadiationField> test_fields,
                            const EvalOptions& opts = {}, std::span<const std::string> names = {});

}  // namespace rf::train
