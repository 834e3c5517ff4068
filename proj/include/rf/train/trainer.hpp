#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "rf/field.hpp"
#include "rf/nn/model.hpp"

namespace rf::train {

struct TrainConfig {
  int max_epochs = 200;
  int patience = 10;
  int physical_batch = 4;    // fields per forward/backward group
  int effective_batch = 64;  // fields per optimizer update
  double initial_lr = 1e-3;
  double eta_min = 1e-6;
  long warmup_steps = 1000;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  bool jitter = false;
  std::uint64_t seed = 0;
  double fluence_weight = 1.0;
  double spectrum_weight = 1.0;
  /// Below 1, each field is trained on a random sub-block holding about this
  /// fraction of its voxels (at least 7 per axis).
  double voxel_fraction = 1.0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Training view of one field: unit-cube voxel centers, normalized total
/// fluence and total spectra.
struct FieldSample {
  std::string name;
  BeamParams beam;
  GridDims dims;
  nn::Matrix locations;  // N x 3
  nn::Matrix fluence;    // N x 1
  nn::Matrix spectrum;   // N x 32
};

FieldSample make_sample(const RadiationField& field, const NormSpec& norm, std::string name = {});

/// Uniform offset in [-extent/2, extent/2] per axis, clamped to [0, 1].
Vec3 jitter_location(const Vec3& center, const Vec3& extent, std::mt19937_64& rng);

/// Loss of the model on one sample, recorded on `g`.
nn::Var sample_loss(nn::Graph& g, nn::Model& model, const FieldSample& s, const TrainConfig& cfg);
/// Mean loss over samples without recording gradients.
double mean_loss(nn::Model& model, std::span<const FieldSample> samples, const TrainConfig& cfg);

/// Improvement means beating the best loss by at least `min_delta`; stops
/// after `patience` consecutive epochs without one.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience, double min_delta = 1e-6) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true if `loss` is an improvement.
  bool update(double loss);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = INFINITY;
  int stale_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = INFINITY;
  long steps = 0;
  bool stopped_early = false;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Where a state dump goes if the loss diverges (none if empty).
  std::filesystem::path dump_dir;
};

/// Trains in place. On return `model` holds the best-validation parameters,
/// rounded to f32 exactly as a checkpoint stores them.
TrainResult train(nn::Model& model, std::span<const FieldSample> train_set, std::span<const FieldSample> val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train(nn::Model& model, const std::vector<std::filesystem::path>& train_paths,
                  const std::vector<std::filesystem::path>& val_paths, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

std::vector<FieldSample> load_samples(const std::vector<std::filesystem::path>& paths, const NormSpec& norm);

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

/// Optimizer updates per epoch for `n` training fields.
long updates_per_epoch(std::size_t n, const TrainConfig& cfg);

}  // namespace rf::train
