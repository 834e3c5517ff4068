// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            every criterion
//   acceptance 1 3 9      a subset

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "brute.hpp"
#include "gradcheck.hpp"
#include "rf/eval/losses.hpp"
#include "rf/eval/metrics.hpp"
#include "rf/eval/ssim.hpp"
#include "rf/nn/checkpoint.hpp"
#include "rf/nn/encoders.hpp"
#include "rf/nn/layers.hpp"
#include "rf/nn/model.hpp"
#include "rf/normalize.hpp"
#include "rf/parallel.hpp"
#include "rf/split.hpp"
#include "rf/srf_io.hpp"
#include "rf/synth.hpp"
#include "rf/train/evaluate.hpp"
#include "rf/train/trainer.hpp"
#include "test_util.hpp"

using namespace rf;
using namespace rf::nn;
using rf::test::random_matrix;
using rf::test::weighted_sum;

namespace {

enum class Status { Pass, Fail, Flag, Info };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

// ---- 1: gradients

constexpr int kInstances = 20;
constexpr double kGradTol = 1e-4;

std::vector<Parameter*> collect(auto& layer) {
  std::vector<Parameter*> out;
  layer.collect(out);
  return out;
}

void perturb(const std::vector<Parameter*>& ps, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  for (auto* p : ps)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += u(rng);
}

Matrix unit_rows(Eigen::Index n, std::mt19937_64& rng) {
  Matrix m = random_matrix(n, 3, rng);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i).normalize();
  return m;
}

BeamParams random_beam(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  BeamParams b;
  b.direction = BeamParams::direction_from_angles(u(rng) * 6.28, u(rng) * 6.28);
  b.tube_distance = 0.35 + 0.4 * u(rng);
  b.tube_spectrum = synth::gen_spectrum(40 + 85 * u(rng), 2.5 + 5 * u(rng), 0.9 * u(rng));
  return b;
}

struct GradSuite {
  std::mt19937_64 rng{2024};
  std::vector<std::string> failures;
  double worst = 0.0;
  int checks = 0;

  Matrix r(Eigen::Index rows, Eigen::Index cols, double lo = -1, double hi = 1) {
    return random_matrix(rows, cols, rng, lo, hi);
  }
  void note(const std::string& name, double err) {
    ++checks;
    worst = std::max(worst, err);
    if (!(err < kGradTol)) failures.push_back(fmt("%s (%.2e)", name.c_str(), err));
  }
  // Gradient w.r.t. inputs, kInstances fresh draws.
  void inputs(const std::string& name, const rf::test::ScalarFn& fn, const std::function<std::vector<Matrix>()>& draw,
              double h = 1e-6) {
    double e = 0.0;
    for (int i = 0; i < kInstances; ++i)
      for (double x : rf::test::gradient_errors(fn, draw(), h)) e = std::max(e, x);
    note(name, e);
  }
  // Gradient w.r.t. every parameter of a freshly built, perturbed layer.
  template <class Layer>
  void params(const std::string& name, const std::function<Layer(nn::Rng&)>& make,
              const std::function<std::vector<Matrix>()>& draw,
              const std::function<Var(Graph&, Layer&, const std::vector<Matrix>&)>& fn) {
    double e = 0.0;
    for (int i = 0; i < kInstances; ++i) {
      nn::Rng lrng(rng());
      Layer layer = make(lrng);
      perturb(collect(layer), rng, 0.5);
      const auto x = draw();
      e = std::max(e, rf::test::parameter_gradient_error([&](Graph& g) { return fn(g, layer, x); }, collect(layer)));
    }
    note(name, e);
  }
};

Outcome gradients() {
  GradSuite s;
  using V = const std::vector<Var>&;
  auto ws = [](Graph& g, Var v) { return weighted_sum(g, v); };

  s.inputs("matmul", [&](Graph& g, V v) { return ws(g, matmul(v[0], v[1])); }, [&] { return std::vector{s.r(4, 6), s.r(6, 5)}; });
  s.inputs("linear", [&](Graph& g, V v) { return ws(g, linear(v[0], v[1], v[2])); },
           [&] { return std::vector{s.r(4, 6), s.r(6, 5), s.r(1, 5)}; });
  s.inputs("add", [&](Graph& g, V v) { return ws(g, add(v[0], v[1])); }, [&] { return std::vector{s.r(4, 5), s.r(1, 5)}; });
  s.inputs("sub", [&](Graph& g, V v) { return ws(g, sub(v[1], v[0])); }, [&] { return std::vector{s.r(4, 5), s.r(1, 5)}; });
  s.inputs("mul", [&](Graph& g, V v) { return ws(g, mul(v[0], v[1])); }, [&] { return std::vector{s.r(4, 5), s.r(4, 5)}; });
  s.inputs("mul broadcast", [&](Graph& g, V v) { return ws(g, mul(v[0], v[1])); },
           [&] { return std::vector{s.r(4, 5), s.r(1, 5)}; });
  s.inputs("scale/add_scalar", [&](Graph& g, V v) { return ws(g, add_scalar(scale(v[0], -1.7), 0.4)); },
           [&] { return std::vector{s.r(3, 7)}; });
  s.inputs("silu", [&](Graph& g, V v) { return ws(g, silu(v[0])); }, [&] { return std::vector{s.r(4, 6, -4, 4)}; });
  s.inputs("sigmoid", [&](Graph& g, V v) { return ws(g, sigmoid(v[0])); }, [&] { return std::vector{s.r(4, 6, -4, 4)}; });
  s.inputs("tanh", [&](Graph& g, V v) { return ws(g, nn::tanh(v[0])); }, [&] { return std::vector{s.r(4, 6, -3, 3)}; });
  s.inputs("softplus", [&](Graph& g, V v) { return ws(g, softplus(v[0])); }, [&] { return std::vector{s.r(4, 6, -4, 4)}; });
  // Inside the clamp range the op is the identity.
  s.inputs("clamp_gc", [&](Graph& g, V v) { return ws(g, clamp_gc(v[0], -2.0, 2.0)); },
           [&] { return std::vector{s.r(4, 6, -1.9, 1.9)}; });
  s.inputs("layer_norm", [&](Graph& g, V v) { return ws(g, layer_norm(v[0], v[1], v[2])); },
           [&] { return std::vector{s.r(5, 8), s.r(1, 8), s.r(1, 8)}; });
  s.inputs("norm_hist", [&](Graph& g, V v) { return ws(g, norm_hist(v[0])); },
           [&] { return std::vector{s.r(4, 8, 0.2, 1.5)}; });
  s.inputs("concat_cols", [&](Graph& g, V v) { return ws(g, concat_cols(v[0], v[1])); },
           [&] { return std::vector{s.r(3, 4), s.r(1, 2)}; });
  s.inputs("sum/mean", [&](Graph&, V v) { return add(sum(mul(v[0], v[0])), mean(nn::tanh(v[0]))); },
           [&] { return std::vector{s.r(4, 5)}; });

  using X = const std::vector<Matrix>&;
  s.params<Linear>("Linear", [](nn::Rng& g) { return Linear("l", 6, 5, g); }, [&] { return std::vector{s.r(4, 6)}; },
                   [&](Graph& g, Linear& l, X x) { return ws(g, nn::silu(l(g, g.constant(x[0])))); });
  s.params<LayerNorm>("LayerNorm", [](nn::Rng&) { return LayerNorm("ln", 7); }, [&] { return std::vector{s.r(4, 7)}; },
                      [&](Graph& g, LayerNorm& l, X x) { return ws(g, l(g, g.constant(x[0]))); });
  for (auto kind : {FusionKind::Concat, FusionKind::FiLM, FusionKind::ResFiLM, FusionKind::GMU}) {
    const std::string name = "fusion " + to_string(kind);
    s.params<Fusion>(name, [kind](nn::Rng& g) { return Fusion("f", kind, 6, 5, g); },
                     [&] { return std::vector{s.r(4, 6), s.r(1, 5)}; },
                     [&](Graph& g, Fusion& f, X x) { return ws(g, f(g, g.constant(x[0]), g.constant(x[1]))); });
    nn::Rng frng(s.rng());
    Fusion f("f", kind, 6, 5, frng);
    perturb(collect(f), s.rng, 0.5);
    s.inputs(name + " inputs", [&](Graph& g, V v) { return ws(g, f(g, v[0], v[1])); },
             [&] { return std::vector{s.r(4, 6), s.r(1, 5)}; });
    s.inputs(name + " per-voxel global", [&](Graph& g, V v) { return ws(g, f(g, v[0], v[1])); },
             [&] { return std::vector{s.r(4, 6), s.r(4, 5)}; });
  }
  s.params<SpectrumEncoder>("spectrum encoder", [](nn::Rng& g) { return SpectrumEncoder(6, g); },
                            [&] { return std::vector{s.r(1, 64, 0.0, 0.05)}; },
                            [&](Graph& g, SpectrumEncoder& e, X x) { return ws(g, e(g, g.constant(x[0]))); });
  s.params<DistanceEncoder>("distance encoder", [](nn::Rng& g) { return DistanceEncoder(g); },
                            [&] { return std::vector{s.r(1, 1, 0.0, 1.0)}; },
                            [&](Graph& g, DistanceEncoder& e, X x) { return ws(g, e(g, g.constant(x[0]))); });
  s.inputs("fourier_encode", [&](Graph& g, V v) { return ws(g, fourier_encode(v[0], 6)); },
           [&] { return std::vector{s.r(4, 3, 0.0, 1.0)}; });
  s.inputs("sh_encode", [&](Graph& g, V v) { return ws(g, sh_encode(v[0], 4)); },
           [&] { return std::vector{unit_rows(3, s.rng)}; }, 1e-7);

  const Matrix t63 = s.r(6, 3);
  s.inputs("l1_mean + mse", [&](Graph&, V v) { return add(eval::l1_mean(v[0], t63), eval::mse(v[0], t63)); },
           [&] { return std::vector{s.r(6, 3)}; });
  const GridDims d7{{7, 8, 7}};
  const Matrix t7 = s.r(static_cast<Eigen::Index>(d7.voxels()), 1, 0.0, 1.0);
  s.inputs("ssim3d", [&](Graph&, V v) { return eval::ssim3d(v[0], t7, d7); },
           [&] { return std::vector{s.r(static_cast<Eigen::Index>(d7.voxels()), 1, 0.0, 1.0)}; });
  s.inputs("fluence loss", [&](Graph&, V v) { return eval::loss_fluence(v[0], t7, d7); },
           [&] { return std::vector{s.r(static_cast<Eigen::Index>(d7.voxels()), 1, 0.0, 1.0)}; });
  Matrix th = s.r(4, 32, 0.0, 1.0);
  for (Eigen::Index i = 0; i < th.rows(); ++i) th.row(i) /= th.row(i).sum();
  s.inputs("spectrum loss", [&](Graph&, V v) { return eval::loss_spectrum(v[0], th); },
           [&] {
             // Off the simplex, away from the |.| kink of the last cumulative difference.
             Matrix p = s.r(4, 32, 0.0, 1.0);
             for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) *= 1.05 / p.row(i).sum();
             return std::vector{p};
           });

  for (auto v : {Variant::SRBF, Variant::SPERF, Variant::PBRF})
    for (auto f : {FusionKind::Concat, FusionKind::FiLM, FusionKind::ResFiLM, FusionKind::GMU}) {
      ModelConfig c;
      c.variant = v;
      c.fusion = f;
      c.width = 8;
      c.L = 2;
      c.l_max = 2;
      c.spec_dim = 4;
      c.depth = 2;
      double e = 0.0;
      for (int i = 0; i < kInstances; ++i) {
        c.norm = NormSpec{static_cast<NormKind>(i % 3), 10.0};
        Model m(c, s.rng());
        Matrix loc;
        BeamParams b;
        // The symmetric head clamps with a pass-through gradient, which is
        // only a derivative inside (-1, 1): redraw until no output is clamped.
        for (bool clamped = true; clamped;) {
          m = Model(c, s.rng());
          perturb(m.parameters(), s.rng, 0.3);
          loc = s.r(3, 3, 0.0, 1.0);
          b = random_beam(s.rng);
          Graph g(false);
          clamped = c.norm.kind == NormKind::MaxNormSym &&
                    m.forward(g, loc, b).fluence.value().cwiseAbs().maxCoeff() > 1.0 - 1e-4;
        }
        e = std::max(e, rf::test::parameter_gradient_error(
                            [&](Graph& g) {
                              auto out = m.forward(g, loc, b);
                              return add(weighted_sum(g, out.fluence, 1), weighted_sum(g, out.spectrum, 2));
                            },
                            m.parameters()));
      }
      s.note("model " + to_string(v) + "/" + to_string(f), e);
    }

  std::string detail = fmt("%d checks x %d instances, worst relative error %.2e", s.checks, kInstances, s.worst);
  for (const auto& f : s.failures) detail += "; over tolerance: " + f;
  return {s.failures.empty() ? Status::Pass : Status::Fail, detail};
}

// ---- 2: metric oracles

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  const GridDims d{{8, 8, 8}};
  const std::vector<eval::GammaCriterion> crits{{6, 0.03}, {4, 0.10}, {4, 0.03}, {6, 0.10}};
  int gamma_mismatch = 0;
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<double> t(d.voxels()), p(d.voxels());
    const double noise = 0.05 + 0.3 * u(rng);
    for (std::size_t v = 0; v < t.size(); ++v) {
      t[v] = u(rng) * u(rng);
      p[v] = std::max(0.0, t[v] + noise * (u(rng) - 0.5));
    }
    const std::array<float, 3> ext{static_cast<float>(0.015 + 0.02 * u(rng)), static_cast<float>(0.015 + 0.02 * u(rng)),
                                   0.02f};
    for (const auto& c : crits)
      if (eval::gamma_pass_map(t, p, d, ext, c) != test::brute_gamma_map(t, p, d, ext, c.delta_d_cm, c.delta_dose))
        ++gamma_mismatch;
  }
  double worst_w = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    const std::size_t n = 32;
    std::vector<double> a(n), b(n);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sa += a[i] = u(rng) < 0.3 ? 0.0 : u(rng);
      sb += b[i] = u(rng) < 0.3 ? 0.0 : u(rng);
    }
    if (sa == 0 || sb == 0) continue;
    for (auto& x : a) x /= sa;
    for (auto& x : b) x /= sb;
    worst_w = std::max(worst_w, std::abs(eval::wasserstein(a, b) - test::brute_wasserstein(a, b)));
  }
  const bool ok = gamma_mismatch == 0 && worst_w < 1e-10;
  return {ok ? Status::Pass : Status::Fail,
          fmt("gamma maps differing from brute force: %d of 400; wasserstein worst |diff| %.2e over 1000 pairs",
              gamma_mismatch, worst_w)};
}

// ---- 3: self comparison

Outcome self_comparison() {
  std::string detail;
  bool ok = true;
  for (auto [name, cfg] : {std::pair{"ds01", synth::GeneratorConfig::ds01()},
                           std::pair{"ds02", synth::GeneratorConfig::ds02()},
                           std::pair{"ds03", synth::GeneratorConfig::ds03()}}) {
    cfg.dims = GridDims{{12, 12, 12}};
    std::vector<RadiationField> fields;
    for (const auto& p : synth::sample_params(cfg, 6)) fields.push_back(synth::gen_field(p.beam, cfg));
    const auto r = train::evaluate_fields(fields, fields);
    for (double v : {r.smape_acc_90, r.smape_acc_scatter, r.ssim, r.gpr_3pct_6cm, r.gpr_10pct_4cm, r.gpr_3pct_4cm,
                     r.gpr_10pct_6cm, r.spec_acc})
      ok = ok && v == 1.0;
    detail += fmt("%s%s: smape90 %.17g scatter %.17g ssim %.17g gpr %.17g spec %.17g", detail.empty() ? "" : "; ", name,
                  r.smape_acc_90, r.smape_acc_scatter, r.ssim, r.gpr_3pct_6cm, r.spec_acc);
  }
  return {ok ? Status::Pass : Status::Fail, detail};
}

// ---- 4: normalization stability

Outcome normalization() {
  const auto n = Normalizer::with_max({NormKind::MaxLogNorm, 1e3}, 1.0);
  double worst = 0.0;
  const int count = 100000;
  for (int i = 0; i < count; ++i) {
    const double x = std::pow(10.0, -8.0 + 8.0 * i / (count - 1));
    worst = std::max(worst, std::abs(n.denormalize(n.normalize(x)) - x) / x);
  }
  // Unit alpha in single precision: 1 + x rounds to 1 and the value is lost.
  const auto unit = Normalizer::with_max({NormKind::MaxLogNorm, 1.0}, 1.0);
  double below = INFINITY;
  for (float x : {9e-9f, 5e-9f, 1e-9f, 1e-10f, 1e-12f})
    below = std::min(below, static_cast<double>(std::abs(unit.denormalize_f32(unit.normalize_f32(x)) - x) / x));
  const bool ok = worst < 1e-5 && below > 1e-3;
  return {ok ? Status::Pass : Status::Fail,
          fmt("alpha 1e3 worst round-trip error %.2e over 1e-8..1; alpha 1 (f32) smallest error below 1e-8 is %.3g",
              worst, below)};
}

// ---- 5-8: training experiments

struct Data {
  std::vector<RadiationField> train, val, test;
};

Data make_data(const synth::GeneratorConfig& cfg, std::size_t count) {
  const auto params = synth::sample_params(cfg, count);
  std::vector<std::filesystem::path> names;
  for (const auto& p : params) names.push_back(p.file);
  const auto split = split_dataset(names, 0);
  auto pick = [&](const std::vector<std::filesystem::path>& which) {
    std::vector<RadiationField> out;
    for (const auto& w : which)
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == w) out.push_back(synth::gen_field(params[i].beam, cfg));
    return out;
  };
  return {pick(split.train), pick(split.val), pick(split.test)};
}

struct RunResult {
  eval::MetricReport test;
  double cpu_s = 0.0;
  int epochs = 0;
};

RunResult train_and_test(const Data& data, const ModelConfig& mc, const train::TrainConfig& tc, const char* tag) {
  std::vector<train::FieldSample> tr, va;
  for (const auto& f : data.train) tr.push_back(train::make_sample(f, mc.norm));
  for (const auto& f : data.val) va.push_back(train::make_sample(f, mc.norm));
  Model model(mc, 1);
  const double c0 = cpu_seconds();
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& r) {
    if (r.epoch % 10 == 0)
      std::printf("      [%s] epoch %d train %.5f val %.5f (%.0f cpu-s)\n", tag, r.epoch, r.train_loss, r.val_loss,
                  cpu_seconds() - c0);
    std::fflush(stdout);
  };
  const auto res = train::train(model, tr, va, tc, hooks);
  RunResult out;
  out.cpu_s = cpu_seconds() - c0;
  out.epochs = static_cast<int>(res.history.size());
  out.test = train::evaluate(model, data.test);
  std::printf("      [%s] test smape_scatter %.4f ssim %.4f smape90 %.4f (%d epochs, %.0f cpu-s)\n", tag,
              out.test.smape_acc_scatter, out.test.ssim, out.test.smape_acc_90, out.epochs, out.cpu_s);
  return out;
}

train::TrainConfig experiment_config(int epochs) {
  train::TrainConfig tc;
  tc.max_epochs = epochs;
  tc.patience = epochs - 1;
  tc.physical_batch = 1;
  tc.effective_batch = 2;
  tc.warmup_steps = 100;
  tc.initial_lr = 3e-3;
  return tc;
}

Outcome end_to_end() {
  const Data data = make_data(synth::GeneratorConfig::ds01(), 64);
  ModelConfig mc;  // width 192, L 10, l_max 4, FiLM, MaxNorm01
  const auto r = train_and_test(data, mc, experiment_config(150), "SRBF");
  const bool ok = r.test.smape_acc_scatter >= 0.85 && r.test.ssim >= 0.90 && r.cpu_s <= 1800;
  return {ok ? Status::Pass : Status::Fail,
          fmt("test smape_acc_scatter %.4f (>= 0.85), ssim %.4f (>= 0.90), %.1f cpu-min (<= 30)",
              r.test.smape_acc_scatter, r.test.ssim, r.cpu_s / 60)};
}

// Smaller models for the comparisons. The log normalizer gives the scatter
// band enough resolution for the comparison to measure something.
ModelConfig ablation_model(Variant v, FusionKind f) {
  ModelConfig mc;
  mc.variant = v;
  mc.fusion = f;
  mc.width = 64;
  mc.norm = {NormKind::MaxLogNorm, 1e3};
  return mc;
}

Outcome spectrum_ablation() {
  const Data data = make_data(synth::GeneratorConfig::ds02(), 64);
  const auto tc = experiment_config(60);
  const auto srbf = train_and_test(data, ablation_model(Variant::SRBF, FusionKind::FiLM), tc, "SRBF");
  const auto sperf = train_and_test(data, ablation_model(Variant::SPERF, FusionKind::FiLM), tc, "SPERF");
  const double gap = 100 * (sperf.test.smape_acc_scatter - srbf.test.smape_acc_scatter);
  return {gap >= 3.0 ? Status::Pass : Status::Fail,
          fmt("smape_acc_scatter SPERF %.4f vs SRBF %.4f: %+.1f points (>= 3)", sperf.test.smape_acc_scatter,
              srbf.test.smape_acc_scatter, gap)};
}

Outcome fusion_ordering() {
  const Data data = make_data(synth::GeneratorConfig::ds03(), 64);
  const auto tc = experiment_config(60);
  double acc[3];
  const FusionKind kinds[3] = {FusionKind::FiLM, FusionKind::Concat, FusionKind::GMU};
  for (int i = 0; i < 3; ++i)
    acc[i] = train_and_test(data, ablation_model(Variant::PBRF, kinds[i]), tc, to_string(kinds[i]).c_str())
                 .test.smape_acc_scatter;
  const bool ok = acc[0] >= acc[1] && acc[1] >= acc[2];
  return {ok ? Status::Pass : Status::Flag,
          fmt("smape_acc_scatter FiLM %.4f, Concat %.4f, GMU %.4f%s", acc[0], acc[1], acc[2],
              ok ? "" : " (ordering not reproduced; flagged, not fatal)")};
}

Outcome overfit() {
  const auto cfg = synth::GeneratorConfig::ds01();
  const auto p = synth::sample_params(cfg, 1);
  const auto field = synth::gen_field(p[0].beam, cfg);
  ModelConfig mc;
  const std::vector<train::FieldSample> s{train::make_sample(field, mc.norm)};
  train::TrainConfig tc;
  tc.max_epochs = 2000;  // one update per epoch
  tc.patience = 1999;
  tc.physical_batch = 1;
  tc.effective_batch = 1;
  tc.warmup_steps = 100;
  tc.initial_lr = 3e-3;
  Model model(mc, 1);
  const auto res = train::train(model, s, s, tc);
  double best = INFINITY;
  int first_below = 0;
  for (const auto& r : res.history) {
    best = std::min(best, r.val_loss);
    if (!first_below && r.val_loss < 1e-3) first_below = r.epoch;
  }
  return {best < 1e-3 ? Status::Pass : Status::Fail,
          fmt("lowest total loss %.6f in %ld steps (first below 1e-3 at step %d)", best, res.steps, first_below)};
}

// ---- 9: serialization

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Unimplemented;
}

Outcome serialization() {
  test::TempDir dir("acceptance");
  std::vector<std::string> bad;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) bad.push_back(what);
  };

  auto cfg = synth::GeneratorConfig::ds03();
  cfg.dims = GridDims{{10, 9, 8}};
  int k = 0;
  for (const auto& p : synth::sample_params(cfg, 4)) {
    const auto f = synth::gen_field(p.beam, cfg);
    const auto bytes = encode_field(f);
    expect(encode_field(decode_field(bytes)) == bytes, "field bytes");
    const auto path = dir / ("f" + std::to_string(k++) + ".srf");
    write_field(f, path);
    expect(read_field(path) == f, "field file");
  }
  const auto good = encode_field(test::random_field(GridDims{{4, 4, 4}}, 1));
  auto corrupt = [](std::vector<std::uint8_t> b, std::size_t at, std::uint8_t x) {
    b[at] ^= x;
    return b;
  };
  const std::vector<std::uint8_t> half(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
  expect(code_of([&] { decode_field(corrupt(good, 0, 0x20)); }) == Errc::BadMagic, "field magic");
  expect(code_of([&] { decode_field(corrupt(good, 4, 0x08)); }) == Errc::VersionUnsupported, "field version");
  expect(code_of([&] { decode_field(half); }) == Errc::TruncatedFile, "field truncation");
  expect(code_of([&] { decode_field(corrupt(good, good.size() / 2, 0x40)); }) == Errc::ChecksumMismatch, "field crc");
  expect(code_of([&] { read_field(dir / "missing.srf"); }) == Errc::IoFailure, "field missing");

  for (auto v : {Variant::SRBF, Variant::SPERF, Variant::PBRF}) {
    ModelConfig mc;
    mc.variant = v;
    mc.width = 32;
    mc.norm = {NormKind::MaxLogNorm, 1e3};
    Model m(mc, 5);
    const nlohmann::json meta{{"epoch", 7}};
    const auto bytes = encode_checkpoint(m, meta);
    Model back = decode_checkpoint(bytes);
    expect(encode_checkpoint(back, meta) == bytes, "checkpoint bytes");
    Model rounded = m;
    round_to_f32(rounded);
    for (std::size_t i = 0; i < back.parameters().size(); ++i)
      expect(back.parameters()[i]->value == rounded.parameters()[i]->value, "checkpoint values");
    save_checkpoint(m, dir / "m.srfm", meta);
    expect(encode_checkpoint(load_checkpoint(dir / "m.srfm"), meta) == bytes, "checkpoint file");

    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 3));
    expect(code_of([&] { decode_checkpoint(corrupt(bytes, 1, 0x20)); }) == Errc::BadMagic, "checkpoint magic");
    expect(code_of([&] { decode_checkpoint(corrupt(bytes, 4, 0x02)); }) == Errc::VersionUnsupported,
           "checkpoint version");
    expect(code_of([&] { decode_checkpoint(cut); }) == Errc::TruncatedFile, "checkpoint truncation");
    expect(code_of([&] { decode_checkpoint(corrupt(bytes, bytes.size() - 40, 0x01)); }) == Errc::ChecksumMismatch,
           "checkpoint crc");
  }
  expect(code_of([&] { load_checkpoint(dir / "missing.srfm"); }) == Errc::IoFailure, "checkpoint missing");

  std::string detail = "4 fields and 3 checkpoints round-tripped byte for byte; 9 corruption cases raised their codes";
  if (!bad.empty()) {
    detail = "failed:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty() ? Status::Pass : Status::Fail, detail};
}

// ---- 10: bench format

Outcome bench_format() {
  const std::string cmd = std::string(RF_CLI) + " bench --dims 50 --reps 20 --warmup 3 2>&1";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {Status::Fail, "could not start the CLI"};
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  while (!out.empty() && out.back() == '\n') out.pop_back();
  const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0 &&
                  std::regex_search(out, std::regex(R"(50 x 50 x 50.*\d+\.\d\d ms ± \d+\.\d\d ms over 20 runs)"));
  return {ok ? Status::Pass : Status::Fail, "\"" + out + "\""};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
  double limit_s = 0.0;  // wall-clock bound, 0 for none
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria{
      {1, "gradient check", gradients, 120},
      {2, "metric oracles", metric_oracles, 60},
      {3, "self comparison", self_comparison},
      {4, "normalization stability", normalization},
      {5, "synthetic end-to-end", end_to_end},
      {6, "spectrum ablation", spectrum_ablation},
      {7, "fusion ordering", fusion_ordering},
      {8, "single-field overfit", overfit},
      {9, "serialization", serialization},
      {10, "bench format", bench_format},
      {11, "full-dataset reproduction",
       [] { return Outcome{Status::Info, "out of CI; recipe in README (Reproducing on a measured dataset)"}; }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s && o.status == Status::Pass)
      o = {Status::Fail, o.detail + fmt("; over the %.0f s limit", c.limit_s)};
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : o.status == Status::Flag ? "FLAG" : "INFO";
    std::printf("%s [%2d] %s: %s (%.1f s)\n", tag, c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.status == Status::Fail;
  }
  return failed == 0 ? 0 : 1;
}
