#include "rf/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rf/eval/losses.hpp"
#include "rf/nn/checkpoint.hpp"
#include "rf/normalize.hpp"
#include "rf/srf_io.hpp"
#include "rf/train/optim.hpp"

namespace rf::train {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Random crop and/or jitter of a sample for one training step.
FieldSample augment(const FieldSample& s, const TrainConfig& cfg, std::mt19937_64& rng) {
  FieldSample out;
  out.name = s.name;
  out.beam = s.beam;
  std::array<std::uint32_t, 3> lo{0, 0, 0};
  out.dims = s.dims;
  if (cfg.voxel_fraction < 1.0) {
    const double f = std::cbrt(cfg.voxel_fraction);
    for (int a = 0; a < 3; ++a) {
      const std::uint32_t n = s.dims.n[a];
      const auto want = static_cast<std::uint32_t>(std::lround(n * f));
      const std::uint32_t side = std::clamp<std::uint32_t>(want, std::min<std::uint32_t>(7, n), n);
      out.dims.n[a] = side;
      lo[a] = static_cast<std::uint32_t>(uniform01(rng) * (n - side + 1));
      lo[a] = std::min(lo[a], n - side);
    }
  }
  const std::size_t n = out.dims.voxels();
  out.locations.resize(static_cast<Eigen::Index>(n), 3);
  out.fluence.resize(static_cast<Eigen::Index>(n), 1);
  out.spectrum.resize(static_cast<Eigen::Index>(n), s.spectrum.cols());
  const Vec3 extent{1.0 / s.dims.n[0], 1.0 / s.dims.n[1], 1.0 / s.dims.n[2]};
  for (std::size_t v = 0; v < n; ++v) {
    const auto c = out.dims.coords(v);
    const auto src = static_cast<Eigen::Index>(s.dims.index(c[0] + lo[0], c[1] + lo[1], c[2] + lo[2]));
    const auto dst = static_cast<Eigen::Index>(v);
    Vec3 loc{s.locations(src, 0), s.locations(src, 1), s.locations(src, 2)};
    if (cfg.jitter) loc = jitter_location(loc, extent, rng);
    for (int a = 0; a < 3; ++a) out.locations(dst, a) = loc[a];
    out.fluence(dst, 0) = s.fluence(src, 0);
    out.spectrum.row(dst) = s.spectrum.row(src);
  }
  return out;
}

[[noreturn]] void diverged(nn::Model& model, const TrainHooks& hooks, int epoch, long step, double loss) {
  std::ostringstream msg;
  msg << "non-finite loss " << loss << " at epoch " << epoch << ", step " << step;
  if (!hooks.dump_dir.empty()) {
    const auto path = hooks.dump_dir / "diverged_state.srfm";
    try {
      std::filesystem::create_directories(hooks.dump_dir);
      nn::save_checkpoint(model, path, {{"epoch", epoch}, {"step", step}});
      msg << "; state dumped to " << path.string();
    } catch (const std::exception& e) {
      msg << "; state dump failed: " << e.what();
    }
  }
  throw Error(Errc::DivergedLoss, msg.str());
}

}  // namespace

void TrainConfig::validate() const {
  if (max_epochs < 1) throw Error(Errc::InvalidConfig, "max_epochs must be >= 1");
  if (patience < 1 || patience >= max_epochs) throw Error(Errc::InvalidConfig, "patience must be in [1, max_epochs)");
  if (physical_batch < 1 || effective_batch < 1 || effective_batch % physical_batch != 0)
    throw Error(Errc::InvalidConfig, "effective_batch must be a positive multiple of physical_batch");
  if (!(initial_lr > 0.0) || eta_min < 0.0 || eta_min > initial_lr)
    throw Error(Errc::InvalidConfig, "need 0 <= eta_min <= initial_lr, initial_lr > 0");
  if (warmup_steps < 0) throw Error(Errc::InvalidConfig, "warmup_steps must be >= 0");
  if (!(voxel_fraction > 0.0) || voxel_fraction > 1.0) throw Error(Errc::InvalidConfig, "voxel_fraction must be in (0, 1]");
  if (fluence_weight < 0.0 || spectrum_weight < 0.0) throw Error(Errc::InvalidConfig, "loss weights must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"physical_batch", c.physical_batch},
          {"effective_batch", c.effective_batch},
          {"initial_lr", c.initial_lr},
          {"eta_min", c.eta_min},
          {"warmup_steps", c.warmup_steps},
          {"weight_decay", c.weight_decay},
          {"betas", {c.beta1, c.beta2}},
          {"jitter", c.jitter},
          {"seed", c.seed},
          {"fluence_weight", c.fluence_weight},
          {"spectrum_weight", c.spectrum_weight},
          {"voxel_fraction", c.voxel_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    auto get = [&](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("max_epochs", c.max_epochs);
    get("patience", c.patience);
    get("physical_batch", c.physical_batch);
    get("effective_batch", c.effective_batch);
    get("initial_lr", c.initial_lr);
    get("eta_min", c.eta_min);
    get("warmup_steps", c.warmup_steps);
    get("weight_decay", c.weight_decay);
    if (j.contains("betas")) {
      c.beta1 = j.at("betas").at(0).get<double>();
      c.beta2 = j.at("betas").at(1).get<double>();
    }
    get("jitter", c.jitter);
    get("seed", c.seed);
    get("fluence_weight", c.fluence_weight);
    get("spectrum_weight", c.spectrum_weight);
    get("voxel_fraction", c.voxel_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

FieldSample make_sample(const RadiationField& field, const NormSpec& norm, std::string name) {
  const FieldChannel total = select_channel(field, ChannelSelect::Total);
  const Normalizer normalizer = Normalizer::fit(norm, std::span<const float>(total.fluence));
  FieldSample s;
  s.name = std::move(name);
  s.beam = field.meta;
  s.dims = field.dims;
  const std::size_t n = field.voxel_count();
  s.locations.resize(static_cast<Eigen::Index>(n), 3);
  s.fluence.resize(static_cast<Eigen::Index>(n), 1);
  s.spectrum.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFieldBins));
  for (std::size_t v = 0; v < n; ++v) {
    const auto r = static_cast<Eigen::Index>(v);
    const Vec3 c = field.dims.unit_center(v);
    for (int a = 0; a < 3; ++a) s.locations(r, a) = c[a];
    s.fluence(r, 0) = normalizer.normalize(total.fluence[v]);
    for (std::size_t b = 0; b < kFieldBins; ++b)
      s.spectrum(r, static_cast<Eigen::Index>(b)) = total.spectra[v * kFieldBins + b];
  }
  return s;
}

Vec3 jitter_location(const Vec3& center, const Vec3& extent, std::mt19937_64& rng) {
  Vec3 out;
  for (int a = 0; a < 3; ++a) out[a] = std::clamp(center[a] + (uniform01(rng) - 0.5) * extent[a], 0.0, 1.0);
  return out;
}

nn::Var sample_loss(nn::Graph& g, nn::Model& model, const FieldSample& s, const TrainConfig& cfg) {
  const nn::ForwardOut out = model.forward(g, s.locations, s.beam);
  nn::Var lf = eval::loss_fluence(out.fluence, s.fluence, s.dims);
  nn::Var ls = eval::loss_spectrum(out.spectrum, s.spectrum);
  return nn::add(nn::scale(lf, cfg.fluence_weight), nn::scale(ls, cfg.spectrum_weight));
}

double mean_loss(nn::Model& model, std::span<const FieldSample> samples, const TrainConfig& cfg) {
  if (samples.empty()) throw Error(Errc::EmptySplit, "no samples to evaluate");
  double acc = 0.0;
  for (const FieldSample& s : samples) {
    nn::Graph g(false);
    acc += sample_loss(g, model, s, cfg).value()(0, 0);
  }
  return acc / static_cast<double>(samples.size());
}

bool EarlyStopping::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

long updates_per_epoch(std::size_t n, const TrainConfig& cfg) {
  const auto eb = static_cast<std::size_t>(cfg.effective_batch);
  return static_cast<long>((n + eb - 1) / eb);
}

TrainResult train(nn::Model& model, std::span<const FieldSample> train_set, std::span<const FieldSample> val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw Error(Errc::EmptySplit, "training split is empty");
  if (val_set.empty()) throw Error(Errc::EmptySplit, "validation split is empty");

  AdamConfig acfg;
  acfg.beta1 = cfg.beta1;
  acfg.beta2 = cfg.beta2;
  acfg.weight_decay = cfg.weight_decay;
  Adam opt(model.parameters(), acfg);
  std::mt19937_64 rng(cfg.seed);

  const std::size_t n = train_set.size();
  const long total_steps = updates_per_epoch(n, cfg) * cfg.max_epochs;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  EarlyStopping stopper(cfg.patience);
  nn::Model best = model;
  nn::round_to_f32(best);
  TrainResult result;
  const bool augmenting = cfg.jitter || cfg.voxel_fraction < 1.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.effective_batch)) {
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.effective_batch), n - start);
      model.zero_grad();
      for (std::size_t i = 0; i < count; ++i) {
        const FieldSample& base = train_set[order[start + i]];
        FieldSample aug;
        if (augmenting) aug = augment(base, cfg, rng);
        const FieldSample& s = augmenting ? aug : base;
        nn::Graph g;
        nn::Var loss = sample_loss(g, model, s, cfg);
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value)) diverged(model, hooks, epoch, result.steps, value);
        train_sum += value;
        g.backward(nn::scale(loss, 1.0 / static_cast<double>(count)));
      }
      lr = lr_schedule(result.steps + 1, total_steps, cfg.initial_lr, cfg.eta_min, cfg.warmup_steps);
      opt.step(lr);
      ++result.steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(n);
    rec.val_loss = mean_loss(model, val_set, cfg);
    rec.lr = lr;
    if (!std::isfinite(rec.val_loss)) diverged(model, hooks, epoch, result.steps, rec.val_loss);
    if (stopper.update(rec.val_loss)) {
      best = model;
      nn::round_to_f32(best);
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
    }
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  model = best;
  return result;
}

std::vector<FieldSample> load_samples(const std::vector<std::filesystem::path>& paths, const NormSpec& norm) {
  std::vector<FieldSample> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(make_sample(read_field(p), norm, p.filename().string()));
  return out;
}

TrainResult train(nn::Model& model, const std::vector<std::filesystem::path>& train_paths,
                  const std::vector<std::filesystem::path>& val_paths, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  if (train_paths.empty()) throw Error(Errc::EmptySplit, "training split is empty");
  if (val_paths.empty()) throw Error(Errc::EmptySplit, "validation split is empty");
  const auto tr = load_samples(train_paths, model.config().norm);
  const auto va = load_samples(val_paths, model.config().norm);
  return train(model, tr, va, cfg, hooks);
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
  os.precision(10);
  os << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

}  // namespace rf::train
