#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "rf/eval/metrics.hpp"
#include "rf/nn/model.hpp"
#include "rf/train/trainer.hpp"

namespace rf::train {

struct SearchSpace {
  std::vector<int> width{64, 96, 128, 192, 256, 384};
  std::vector<int> L{10, 12, 14};
  std::vector<int> l_max{4, 6, 8};
  std::vector<nn::FusionKind> fusion{nn::FusionKind::Concat, nn::FusionKind::FiLM, nn::FusionKind::ResFiLM,
                                     nn::FusionKind::GMU};
  std::vector<NormSpec> norm{{NormKind::MaxNorm01, 1.0},
                             {NormKind::MaxNormSym, 1.0},
                             {NormKind::MaxLogNorm, 1.0},
                             {NormKind::MaxLogNorm, 1e3}};
  std::vector<bool> jitter{true, false};
  std::vector<int> spec_dim{16, 32, 64};

  /// Number of combinations. Throws EmptySpace if an axis is empty.
  std::size_t size() const;
  /// Combination `index` in mixed radix, the last axis (spec_dim) fastest.
  std::pair<nn::ModelConfig, bool> at(std::size_t index, const nn::ModelConfig& base) const;
};

nlohmann::json to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const nlohmann::json& j);

enum class SearchMode { Grid, Random };
SearchMode parse_search_mode(const std::string& name);

struct Trial {
  std::size_t index = 0;  // combination index in the space
  nn::ModelConfig model;
  bool jitter = false;
  double val_loss = 0.0;
  int epochs = 0;
  eval::MetricReport test;
};

nlohmann::json to_json(const Trial& t);

struct SearchOptions {
  std::size_t budget = 1;
  SearchMode mode = SearchMode::Random;
  int trial_epochs = 20;
  std::uint64_t seed = 0;
  /// When set, trials.json and best_config.json are written here.
  std::filesystem::path out_dir;
  std::function<void(const Trial&)> on_trial;
};

/// Combination indices a search visits: the first `budget` in grid order, or
/// `budget` distinct ones drawn with the seed.
std::vector<std::size_t> plan_trials(const SearchSpace& space, const SearchOptions& opts);

/// Trains one model per planned combination for `trial_epochs` epochs and
/// returns the trials ranked by best validation loss (ascending). Each trial
/// measures its validation loss in its own normalizer's space.
std::vector<Trial> hyper_search(const SearchSpace& space, const nn::ModelConfig& base, const TrainConfig& cfg,
                                std::span<const RadiationField> train_fields, std::span<const RadiationField> val_fields,
                                std::span<const RadiationField> test_fields, const SearchOptions& opts);

}  // namespace rf::train
