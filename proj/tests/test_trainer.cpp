#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "rf/nn/checkpoint.hpp"
#include "rf/synth.hpp"
#include "rf/train/evaluate.hpp"
#include "rf/train/optim.hpp"
#include "rf/train/search.hpp"
#include "rf/train/trainer.hpp"
#include "test_util.hpp"

using namespace rf;
using namespace rf::train;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected rf::Error";
  return Errc::Unimplemented;
}

synth::GeneratorConfig small_gen() {
  auto cfg = synth::GeneratorConfig::ds01();
  cfg.dims = GridDims{{8, 8, 8}};
  cfg.voxel_extent = {0.04f, 0.04f, 0.04f};
  return cfg;
}

std::vector<RadiationField> small_fields(std::size_t n, std::uint64_t seed = 3) {
  auto cfg = small_gen();
  cfg.seed = seed;
  std::vector<RadiationField> out;
  for (const auto& p : synth::sample_params(cfg, n)) out.push_back(synth::gen_field(p.beam, cfg));
  return out;
}

nn::ModelConfig tiny_model() {
  nn::ModelConfig c;
  c.width = 16;
  c.L = 3;
  c.l_max = 2;
  c.spec_dim = 8;
  c.depth = 2;
  return c;
}

TrainConfig quick_train(int epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.patience = epochs - 1;
  c.physical_batch = 1;
  c.effective_batch = 2;
  c.warmup_steps = 2;
  return c;
}

std::vector<FieldSample> samples(const std::vector<RadiationField>& fields, const NormSpec& norm = {}) {
  std::vector<FieldSample> out;
  for (const auto& f : fields) out.push_back(make_sample(f, norm));
  return out;
}

}  // namespace

// ---- schedule and optimizer

TEST(LrSchedule, ReferenceValues) {
  EXPECT_EQ(lr_schedule(0, 10000, 1e-3, 1e-6, 1000), 0.0);
  EXPECT_NEAR(lr_schedule(500, 10000, 1e-3, 1e-6, 1000), 5e-4, 1e-18);
  EXPECT_NEAR(lr_schedule(1000, 10000, 1e-3, 1e-6, 1000), 1e-3, 1e-18);
  EXPECT_NEAR(lr_schedule(5500, 10000, 1e-3, 1e-6, 1000), 5.005000000000001e-04, 1e-18);
  EXPECT_NEAR(lr_schedule(10000, 10000, 1e-3, 1e-6, 1000), 1e-6, 1e-18);
}

TEST(LrSchedule, MonotoneAfterWarmupAndRangeChecked) {
  double prev = INFINITY;
  for (long s = 1000; s <= 10000; s += 250) {
    const double lr = lr_schedule(s, 10000, 1e-3, 1e-6, 1000);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_EQ(code_of([] { lr_schedule(-1, 100, 1e-3, 1e-6, 10); }), Errc::StepOutOfRange);
  EXPECT_EQ(code_of([] { lr_schedule(101, 100, 1e-3, 1e-6, 10); }), Errc::StepOutOfRange);
  EXPECT_NEAR(lr_schedule(50, 100, 1e-3, 1e-6, 100), 5e-4, 1e-18);
  EXPECT_NEAR(lr_schedule(100, 100, 1e-3, 1e-6, 100), 1e-3, 1e-18);
  EXPECT_NEAR(lr_schedule(7, 100, 1e-3, 1e-6, 0), lr_schedule(7, 100, 1e-3, 1e-6, 0), 0.0);
}

class AdamRef : public ::testing::TestWithParam<bool> {};

TEST_P(AdamRef, TwoStepsMatchReference) {
  const bool decoupled = GetParam();
  nn::Parameter x("x", nn::Matrix::Constant(1, 1, 1.0));
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  cfg.decoupled = decoupled;
  Adam opt({&x}, cfg);
  for (int i = 0; i < 2; ++i) {
    x.grad = nn::Matrix::Constant(1, 1, x.value(0, 0) - 3.0);
    opt.step(0.1);
  }
  EXPECT_EQ(opt.steps(), 2);
  EXPECT_NEAR(x.value(0, 0), decoupled ? 1.178963949147753 : 1.199813709179137, 1e-14);
}

INSTANTIATE_TEST_SUITE_P(Decay, AdamRef, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "AdamW" : "AdamL2"; });

TEST(Adam, ShapeMismatch) {
  nn::Parameter x("x", nn::Matrix::Zero(2, 2));
  Adam opt({&x}, {});
  x.grad = nn::Matrix::Zero(1, 2);
  EXPECT_EQ(code_of([&] { opt.step(0.1); }), Errc::ShapeMismatch);
}

// ---- early stopping

TEST(EarlyStopping, StopsTenEpochsAfterLastImprovement) {
  for (int k : {1, 5, 20}) {
    EarlyStopping s(10);
    int stopped_at = 0;
    for (int epoch = 1; epoch <= 100; ++epoch) {
      const double loss = epoch <= k ? 1.0 / epoch : 1.0 / k + 1e-3;
      s.update(loss);
      if (s.should_stop()) {
        stopped_at = epoch;
        break;
      }
    }
    EXPECT_EQ(stopped_at, k + 10) << k;
  }
}

TEST(EarlyStopping, TinyGainsDoNotCount) {
  EarlyStopping s(3);
  EXPECT_TRUE(s.update(1.0));
  EXPECT_FALSE(s.update(1.0 - 1e-7));
  EXPECT_TRUE(s.update(0.9));
  EXPECT_EQ(s.best(), 0.9);
  EXPECT_EQ(s.stale_epochs(), 0);
}

// ---- config

TEST(TrainConfigTest, DefaultsValidationJson) {
  TrainConfig c;
  EXPECT_EQ(c.max_epochs, 200);
  EXPECT_EQ(c.patience, 10);
  EXPECT_EQ(c.physical_batch, 4);
  EXPECT_EQ(c.effective_batch, 64);
  EXPECT_EQ(c.initial_lr, 1e-3);
  EXPECT_EQ(c.eta_min, 1e-6);
  EXPECT_EQ(c.warmup_steps, 1000);
  EXPECT_EQ(c.weight_decay, 1e-4);
  EXPECT_EQ(c.beta2, 0.99);
  EXPECT_NO_THROW(c.validate());
  c.jitter = true;
  c.voxel_fraction = 0.25;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);

  TrainConfig bad;
  bad.effective_batch = 6;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidConfig);
  bad = {};
  bad.patience = 200;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidConfig);
  EXPECT_EQ(code_of([] { train_config_from_json({{"max_epochs", "many"}}); }), Errc::InvalidConfig);
  EXPECT_EQ(updates_per_epoch(46, TrainConfig{}), 1);
  TrainConfig eb4;
  eb4.effective_batch = 4;
  EXPECT_EQ(updates_per_epoch(46, eb4), 12);
}

// ---- samples

TEST(Samples, NormalizedTotalChannel) {
  const auto fields = small_fields(1);
  const FieldSample s = make_sample(fields[0], {NormKind::MaxNorm01, 1.0}, "a");
  EXPECT_EQ(s.name, "a");
  EXPECT_EQ(s.locations.rows(), 512);
  EXPECT_DOUBLE_EQ(s.fluence.maxCoeff(), 1.0);
  EXPECT_GE(s.fluence.minCoeff(), 0.0);
  EXPECT_GT(s.locations.minCoeff(), 0.0);
  EXPECT_LT(s.locations.maxCoeff(), 1.0);
  for (Eigen::Index r = 0; r < s.spectrum.rows(); ++r)
    if (s.fluence(r, 0) > 0) EXPECT_NEAR(s.spectrum.row(r).sum(), 1.0, 1e-5);
}

TEST(Samples, JitterStaysInVoxelAndCube) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 c{0.0625, 0.5, 0.9375};
    const Vec3 e{0.125, 0.125, 0.125};
    const Vec3 j = jitter_location(c, e, rng);
    for (int a = 0; a < 3; ++a) {
      EXPECT_LE(std::abs(j[a] - c[a]), e[a] / 2 + 1e-15);
      EXPECT_GE(j[a], 0.0);
      EXPECT_LE(j[a], 1.0);
    }
  }
}

// ---- gradient accumulation

TEST(Accumulation, SplitBatchesMatchCombinedBatch) {
  const auto s = samples(small_fields(4));
  nn::Model a(tiny_model(), 1);
  nn::Model b = a;
  const TrainConfig cfg;

  a.zero_grad();
  for (const auto& x : s) {
    nn::Graph g;
    g.backward(nn::scale(sample_loss(g, a, x, cfg), 0.25));
  }

  b.zero_grad();
  nn::Graph g;
  nn::Var total = sample_loss(g, b, s[0], cfg);
  for (std::size_t i = 1; i < s.size(); ++i) total = nn::add(total, sample_loss(g, b, s[i], cfg));
  g.backward(nn::scale(total, 0.25));

  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double scale = std::max(pb[i]->grad.cwiseAbs().maxCoeff(), 1e-300);
    EXPECT_LT((pa[i]->grad - pb[i]->grad).cwiseAbs().maxCoeff() / scale, 1e-6) << pa[i]->name;
  }
}

// ---- training loop

TEST(Train, HistoryBestAndRounding) {
  const auto tr = samples(small_fields(4, 3)), va = samples(small_fields(2, 4));
  nn::Model m(tiny_model(), 2);
  const TrainConfig cfg = quick_train(6);
  std::vector<EpochRecord> seen;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { seen.push_back(r); };
  const TrainResult r = rf::train::train(m, tr, va, cfg, hooks);
  ASSERT_EQ(r.history.size(), 6u);
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_EQ(r.steps, 12);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  double best = INFINITY;
  int best_epoch = 0;
  for (const auto& h : r.history)
    if (h.val_loss < best - 1e-6) {
      best = h.val_loss;
      best_epoch = h.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_loss, best);
  for (const auto* p : m.parameters())
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      EXPECT_EQ(p->value.data()[i], static_cast<double>(static_cast<float>(p->value.data()[i])));
}

TEST(Train, DeterministicForSeed) {
  const auto tr = samples(small_fields(2, 5)), va = samples(small_fields(1, 6));
  TrainConfig cfg = quick_train(3);
  cfg.jitter = true;
  cfg.seed = 9;
  nn::Model a(tiny_model(), 3), b(tiny_model(), 3);
  rf::train::train(a, tr, va, cfg);
  rf::train::train(b, tr, va, cfg);
  EXPECT_EQ(nn::encode_checkpoint(a), nn::encode_checkpoint(b));
}

TEST(Train, EarlyStopWithFrozenModel) {
  const auto tr = samples(small_fields(2, 5)), va = samples(small_fields(1, 6));
  TrainConfig cfg = quick_train(30);
  cfg.patience = 3;
  cfg.initial_lr = 1e-12;
  cfg.eta_min = 0.0;
  cfg.weight_decay = 0.0;
  nn::Model m(tiny_model(), 4);
  const TrainResult r = rf::train::train(m, tr, va, cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.history.size(), 4u);
  EXPECT_EQ(r.best_epoch, 1);
}

TEST(Train, NonFiniteStateIsRejected) {
  const auto tr = samples(small_fields(2, 5)), va = samples(small_fields(1, 6));
  nn::Model m(tiny_model(), 5);
  m.parameters()[0]->value(0, 0) = INFINITY;
  test::TempDir dir("diverge");
  TrainHooks hooks;
  hooks.dump_dir = dir.path();
  EXPECT_EQ(code_of([&] { rf::train::train(m, tr, va, quick_train(3), hooks); }), Errc::NonFiniteParameters);
}

TEST(Train, EmptySplits) {
  const auto tr = samples(small_fields(1));
  nn::Model m(tiny_model(), 1);
  EXPECT_EQ(code_of([&] { rf::train::train(m, tr, {}, quick_train(3)); }), Errc::EmptySplit);
  EXPECT_EQ(code_of([&] { rf::train::train(m, {}, tr, quick_train(3)); }), Errc::EmptySplit);
}

TEST(Train, HistoryCsv) {
  test::TempDir dir("hist");
  std::vector<EpochRecord> h{{1, 0.5, 0.6, 1e-3}, {2, 0.4, 0.5, 5e-4}};
  write_history_csv(h, dir / "history.csv");
  std::ifstream in(dir / "history.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,train_loss,val_loss,lr");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

// ---- evaluation

TEST(Evaluate, TruthAgainstItselfIsPerfect) {
  const auto fields = small_fields(3, 8);
  const auto r = evaluate_fields(fields, fields);
  EXPECT_EQ(r.smape_acc_90, 1.0);
  EXPECT_EQ(r.smape_acc_scatter, 1.0);
  EXPECT_EQ(r.ssim, 1.0);
  EXPECT_EQ(r.gpr_3pct_6cm, 1.0);
  EXPECT_EQ(r.gpr_10pct_4cm, 1.0);
  EXPECT_EQ(r.gpr_3pct_4cm, 1.0);
  EXPECT_EQ(r.gpr_10pct_6cm, 1.0);
  EXPECT_EQ(r.spec_acc, 1.0);
  EXPECT_EQ(r.fields.size(), 3u);
}

TEST(Evaluate, UntrainedModelIsPoorOnScatter) {
  const auto fields = small_fields(4, 9);
  nn::ModelConfig mc;
  mc.width = 32;
  nn::Model m(mc, 1);
  const auto r = evaluate(m, fields);
  EXPECT_LT(r.smape_acc_scatter, 0.6);
  EXPECT_LT(r.ssim, 0.9);
}

TEST(Evaluate, ShapeAndCountChecks) {
  const auto fields = small_fields(2, 8);
  EXPECT_EQ(code_of([&] { evaluate_fields(fields, std::span(fields).first(1)); }), Errc::DimensionMismatch);
  EXPECT_EQ(code_of([&] { evaluate_fields({}, {}); }), Errc::EmptySplit);
}

// ---- hyperparameter search

TEST(Search, SpaceIndexing) {
  SearchSpace s;
  EXPECT_EQ(s.size(), 6u * 3 * 3 * 4 * 4 * 2 * 3);
  const nn::ModelConfig base = tiny_model();
  auto [first, jit0] = s.at(0, base);
  EXPECT_EQ(first.width, 64);
  EXPECT_EQ(first.spec_dim, 16);
  EXPECT_TRUE(jit0);
  auto [second, jit1] = s.at(1, base);
  EXPECT_EQ(second.spec_dim, 32);
  auto [last, jitl] = s.at(s.size() - 1, base);
  EXPECT_EQ(last.width, 384);
  EXPECT_EQ(last.L, 14);
  EXPECT_EQ(last.fusion, nn::FusionKind::GMU);
  EXPECT_EQ(last.norm.alpha, 1e3);
  EXPECT_FALSE(jitl);
  EXPECT_EQ(last.depth, base.depth);
  EXPECT_EQ(search_space_from_json(to_json(s)).size(), s.size());
  s.L.clear();
  EXPECT_EQ(code_of([&] { s.size(); }), Errc::EmptySpace);
}

TEST(Search, PlanGridAndRandom) {
  SearchSpace s;
  SearchOptions o;
  o.budget = 5;
  o.mode = SearchMode::Grid;
  EXPECT_EQ(plan_trials(s, o), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  o.mode = SearchMode::Random;
  o.budget = 50;
  const auto r = plan_trials(s, o);
  EXPECT_EQ(std::set<std::size_t>(r.begin(), r.end()).size(), 50u);
  EXPECT_EQ(plan_trials(s, o), r);
  o.seed = 1;
  EXPECT_NE(plan_trials(s, o), r);
  EXPECT_EQ(parse_search_mode("grid"), SearchMode::Grid);
  EXPECT_THROW(parse_search_mode("bayes"), Error);
}

TEST(Search, RunsAndRanksTrials) {
  const auto tr = small_fields(2, 10), va = small_fields(1, 11), te = small_fields(1, 12);
  SearchSpace s;
  s.width = {8, 16};
  s.L = {3};
  s.l_max = {2};
  s.fusion = {nn::FusionKind::FiLM};
  s.norm = {{NormKind::MaxNorm01, 1.0}, {NormKind::MaxLogNorm, 1e3}};
  s.jitter = {false};
  s.spec_dim = {8};
  test::TempDir dir("search");
  SearchOptions o;
  o.budget = 4;
  o.mode = SearchMode::Grid;
  o.trial_epochs = 2;
  o.out_dir = dir.path();
  int calls = 0;
  o.on_trial = [&](const Trial&) { ++calls; };
  TrainConfig cfg = quick_train(2);
  const auto trials = hyper_search(s, tiny_model(), cfg, tr, va, te, o);
  ASSERT_EQ(trials.size(), 4u);
  EXPECT_EQ(calls, 4);
  for (std::size_t i = 1; i < trials.size(); ++i) EXPECT_LE(trials[i - 1].val_loss, trials[i].val_loss);
  EXPECT_TRUE(std::filesystem::exists(dir / "trials.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "best_config.json"));
}
