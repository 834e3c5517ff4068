#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rf/binary.hpp"
#include "rf/error.hpp"
#include "rf/json_io.hpp"
#include "rf/kerma.hpp"
#include "rf/nn/checkpoint.hpp"
#include "rf/nn/infer.hpp"
#include "rf/parallel.hpp"
#include "rf/split.hpp"
#include "rf/srf_io.hpp"
#include "rf/stats.hpp"
#include "rf/synth.hpp"
#include "rf/train/evaluate.hpp"
#include "rf/train/search.hpp"
#include "rf/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  const auto bytes = rf::io::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw rf::Error(rf::Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  rf::io::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

rf::GridDims parse_dims(const std::vector<std::uint32_t>& v) {
  if (v.size() == 1) return rf::GridDims{{v[0], v[0], v[0]}};
  if (v.size() == 3) return rf::GridDims{{v[0], v[1], v[2]}};
  throw rf::Error(rf::Errc::InvalidConfig, "--dims takes 1 or 3 values");
}

std::array<float, 3> parse_extent(const std::vector<float>& v) {
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw rf::Error(rf::Errc::InvalidConfig, "--voxel takes 1 or 3 values");
}

std::vector<fs::path> pick_split(const fs::path& dir, const std::string& which, std::uint64_t seed) {
  auto files = rf::list_fields(dir);
  if (files.empty()) throw rf::Error(rf::Errc::EmptyDataset, "no .srf files in " + dir.string());
  if (which == "all") return files;
  const auto split = rf::split_dataset(files, seed);
  if (which == "train") return split.train;
  if (which == "val") return split.val;
  if (which == "test") return split.test;
  throw rf::Error(rf::Errc::InvalidConfig, "unknown split '" + which + "'");
}

std::vector<rf::RadiationField> read_all(const std::vector<fs::path>& paths) {
  std::vector<rf::RadiationField> out;
  for (const auto& p : paths) out.push_back(rf::read_field(p));
  return out;
}

std::vector<std::string> names_of(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.filename().string());
  return out;
}

json split_json(const rf::DatasetSplit& s) {
  return {{"train", names_of(s.train)}, {"val", names_of(s.val)}, {"test", names_of(s.test)}};
}

json stats_json(const rf::DatasetStats& s) {
  auto ms = [](const rf::MeanStd& m) {
    return json{{"mean", std::isnan(m.mean) ? json() : json(m.mean)}, {"std", std::isnan(m.std) ? json() : json(m.std)}};
  };
  return {{"fields", s.fields},
          {"dr_db", s.dr_db},
          {"gini", s.gini},
          {"mean_energy_kev", ms(s.mean_energy)},
          {"peak_energy_kev", ms(s.peak_energy)},
          {"tube_distance_m", ms(s.mean_distance)},
          {"opening_angle_deg", ms(s.mean_angle)}};
}

// Options shared by commands that build a model from scratch.
struct ModelFlags {
  std::string variant, fusion, norm;
  int width = 0, L = 0, l_max = 0, spec_dim = 0, depth = 0;

  void add(CLI::App* app) {
    app->add_option("--variant", variant, "SRBF, SPERF or PBRF");
    app->add_option("--width", width, "Neurons per main-path layer");
    app->add_option("--L", L, "Fourier frequency count");
    app->add_option("--l-max", l_max, "Spherical-harmonics degree count");
    app->add_option("--spec-dim", spec_dim, "Encoded spectrum size");
    app->add_option("--fusion", fusion, "Concat, FiLM, ResFiLM or GMU");
    app->add_option("--norm", norm, "MaxNorm01, MaxNormSym or MaxLogNorm(alpha)");
    app->add_option("--depth", depth, "Hidden layers per MLP block");
  }
  void apply(rf::nn::ModelConfig& c) const {
    if (!variant.empty()) c.variant = rf::nn::parse_variant(variant);
    if (!fusion.empty()) c.fusion = rf::nn::parse_fusion(fusion);
    if (!norm.empty()) c.norm = rf::NormSpec::parse(norm);
    if (width) c.width = width;
    if (L) c.L = L;
    if (l_max) c.l_max = l_max;
    if (spec_dim) c.spec_dim = spec_dim;
    if (depth) c.depth = depth;
    c.validate();
  }
};

struct TrainFlags {
  int epochs = 0, patience = 0, physical = 0, effective = 0;
  long warmup = -1;
  double lr = 0.0, fraction = 0.0;
  std::string jitter;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Maximum epochs");
    app->add_option("--patience", patience, "Early-stopping patience");
    app->add_option("--physical-batch", physical, "Fields per forward/backward group");
    app->add_option("--effective-batch", effective, "Fields per optimizer update");
    app->add_option("--lr", lr, "Initial learning rate");
    app->add_option("--warmup", warmup, "Warmup steps");
    app->add_option("--voxel-fraction", fraction, "Sub-block fraction of voxels per step");
    app->add_option("--jitter", jitter, "on/off")->check(CLI::IsMember({"on", "off"}));
  }
  void apply(rf::train::TrainConfig& c) const {
    if (epochs) c.max_epochs = epochs;
    if (patience) c.patience = patience;
    if (physical) c.physical_batch = physical;
    if (effective) c.effective_batch = effective;
    if (lr > 0.0) c.initial_lr = lr;
    if (warmup >= 0) c.warmup_steps = warmup;
    if (fraction > 0.0) c.voxel_fraction = fraction;
    if (!jitter.empty()) c.jitter = jitter == "on";
    c.validate();
  }
};

}  // namespace

int main(int argc, char** argv) {
  rf::tune_allocator();
  CLI::App app{"rfnet: neural estimators for voxelized X-ray radiation fields"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset of SRF1 fields plus manifest.json");
  std::string gen_preset = "ds01", gen_config;
  std::size_t gen_count = 0;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  std::vector<std::uint32_t> gen_dims;
  std::vector<float> gen_voxel;
  gen->add_option("--preset", gen_preset, "ds01, ds02 or ds03")->check(CLI::IsMember({"ds01", "ds02", "ds03"}));
  gen->add_option("--config", gen_config, "Generator JSON (overrides the preset)");
  gen->add_option("--count", gen_count, "Number of fields")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--dims", gen_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  gen->add_option("--voxel", gen_voxel, "Voxel extent in m (e or ex ey ez)")->expected(1, 3);

  // stats
  auto* st = app.add_subcommand("stats", "Dataset statistics and fluence histograms");
  std::string st_data, st_out, st_csv, st_channel = "total", st_pool = "beam,scatter";
  double st_cut = 1e-3;
  std::size_t st_bins = 50;
  st->add_option("--data", st_data, "Dataset directory")->required();
  st->add_option("--out", st_out, "Statistics JSON (stdout if omitted)");
  st->add_option("--hist-csv", st_csv, "Histogram CSV (bin_low,bin_high,count)");
  st->add_option("--channel", st_channel, "Histogram channel")->check(CLI::IsMember({"beam", "scatter", "total"}));
  st->add_option("--pool", st_pool, "Channels pooled for DR/Gini")
      ->check(CLI::IsMember({"beam", "scatter", "beam,scatter"}));
  st->add_option("--cut", st_cut, "Lower histogram cut, fraction of each field's max");
  st->add_option("--bins", st_bins, "Histogram bins");

  // train
  auto* tr = app.add_subcommand("train", "Train a model; writes model.srfm, history.csv, split.json, report.json");
  std::string tr_data, tr_out, tr_config;
  std::uint64_t tr_seed = 0, tr_split_seed = 0;
  ModelFlags tr_model;
  TrainFlags tr_flags;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--config", tr_config, "JSON with \"model\" and \"train\" sections");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "Initialization and shuffling seed");
  auto* tr_split_opt = tr->add_option("--split-seed", tr_split_seed, "Dataset split seed");
  tr_model.add(tr);
  tr_flags.add(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a model (or a predicted dataset) against ground truth");
  std::string ev_model, ev_data, ev_pred, ev_split = "test", ev_kerma, ev_out;
  std::uint64_t ev_split_seed = 0;
  bool ev_per_voxel = false;
  ev->add_option("--model", ev_model, "Checkpoint to evaluate");
  ev->add_option("--data", ev_data, "Ground-truth dataset directory")->required();
  ev->add_option("--pred", ev_pred, "Directory of predicted fields with matching file names");
  ev->add_option("--split", ev_split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  ev->add_option("--split-seed", ev_split_seed, "Dataset split seed");
  ev->add_option("--kerma", ev_kerma, "Air kerma coefficient table (unit coefficients if omitted)");
  ev->add_flag("--per-voxel-spec", ev_per_voxel, "Average Spec_acc per voxel instead of pooling");
  ev->add_option("--out", ev_out, "Report JSON");

  // predict
  auto* pr = app.add_subcommand("predict", "Predict a field from a checkpoint and beam parameters");
  std::string pr_model, pr_beam, pr_like, pr_out;
  std::vector<std::uint32_t> pr_dims{16};
  std::vector<float> pr_voxel{0.04f};
  double pr_scale = 1.0;
  std::size_t pr_batch = 4096;
  pr->add_option("--model", pr_model, "Checkpoint")->required();
  pr->add_option("--beam", pr_beam, "Beam parameter JSON");
  pr->add_option("--like", pr_like, "Take beam, grid and extent from this SRF1 field");
  pr->add_option("--dims", pr_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  pr->add_option("--voxel", pr_voxel, "Voxel extent in m")->expected(1, 3);
  pr->add_option("--scale", pr_scale, "Fluence maximum used to denormalize");
  pr->add_option("--batch", pr_batch, "Voxels per forward call");
  pr->add_option("--out", pr_out, "Output SRF1 file")->required();

  // bench
  auto* be = app.add_subcommand("bench", "Time full-field inference");
  std::string be_model, be_out;
  ModelFlags be_flags;
  std::vector<std::uint32_t> be_dims{50};
  std::size_t be_batch = 4096;
  int be_reps = 20, be_warmup = 3;
  std::uint64_t be_seed = 0;
  be->add_option("--model", be_model, "Checkpoint (a freshly initialized model otherwise)");
  be_flags.add(be);
  be->add_option("--dims", be_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  be->add_option("--batch", be_batch, "Voxels per forward call");
  be->add_option("--reps", be_reps, "Timed runs")->check(CLI::Range(20, 100000));
  be->add_option("--warmup", be_warmup, "Untimed runs")->check(CLI::Range(3, 100000));
  be->add_option("--seed", be_seed, "Initialization seed for a fresh model");
  be->add_option("--out", be_out, "Timing JSON");

  // hypersearch
  auto* hs = app.add_subcommand("hypersearch", "Grid or random search; writes trials.json and best_config.json");
  std::string hs_data, hs_out, hs_space, hs_config, hs_mode = "random";
  std::size_t hs_budget = 1;
  int hs_epochs = 20;
  std::uint64_t hs_seed = 0, hs_split_seed = 0;
  ModelFlags hs_model;
  TrainFlags hs_flags;
  hs->add_option("--data", hs_data, "Dataset directory")->required();
  hs->add_option("--out", hs_out, "Output directory")->required();
  hs->add_option("--space", hs_space, "Search space JSON (full default space if omitted)");
  hs->add_option("--config", hs_config, "JSON with \"model\" and \"train\" sections");
  hs->add_option("--mode", hs_mode, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  hs->add_option("--budget", hs_budget, "Trial count")->check(CLI::PositiveNumber);
  hs->add_option("--trial-epochs", hs_epochs, "Epochs per trial");
  hs->add_option("--seed", hs_seed, "Sampling and initialization seed");
  hs->add_option("--split-seed", hs_split_seed, "Dataset split seed");
  hs_model.add(hs);
  hs_flags.add(hs);

  // import
  auto* im = app.add_subcommand("import", "Convert external field formats (not built in)");
  std::string im_format = "radfiled3d", im_in, im_out;
  im->add_option("--format", im_format, "Source format");
  im->add_option("--in", im_in, "Source path")->required();
  im->add_option("--out", im_out, "Destination SRF1 path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      rf::synth::GeneratorConfig cfg = gen_preset == "ds01"   ? rf::synth::GeneratorConfig::ds01()
                                       : gen_preset == "ds02" ? rf::synth::GeneratorConfig::ds02()
                                                              : rf::synth::GeneratorConfig::ds03();
      if (!gen_config.empty()) cfg = rf::synth::config_from_json(read_json(gen_config), cfg);
      if (gen_seed_opt->count()) cfg.seed = gen_seed;
      if (!gen_dims.empty()) cfg.dims = parse_dims(gen_dims);
      if (!gen_voxel.empty()) cfg.voxel_extent = parse_extent(gen_voxel);
      const auto paths = rf::synth::gen_dataset(cfg, gen_count, gen_out);
      write_json(fs::path(gen_out) / "generator.json", rf::synth::config_to_json(cfg));
      std::cout << "wrote " << paths.size() << " fields to " << gen_out << " (preset " << gen_preset << ", seed "
                << cfg.seed << ")\n";
    } else if (*st) {
      auto files = rf::list_fields(st_data);
      if (files.empty()) throw rf::Error(rf::Errc::EmptyDataset, "no .srf files in " + st_data);
      const auto fields = read_all(files);
      rf::ChannelSet pool;
      pool.beam = st_pool.find("beam") != std::string::npos;
      pool.scatter = st_pool.find("scatter") != std::string::npos;
      const auto stats = rf::compute_stats(fields, pool);
      const auto channel = rf::parse_channel_select(st_channel);
      rf::Histogram hist = rf::fluence_histogram(fields.front(), channel, st_cut, st_bins);
      for (std::size_t i = 1; i < fields.size(); ++i)
        rf::accumulate(hist, rf::fluence_histogram(fields[i], channel, st_cut, st_bins));
      json j = stats_json(stats);
      j["histogram"] = {{"channel", st_channel}, {"lower_cut", st_cut}, {"bins", st_bins}, {"counted", hist.total()}};
      if (!st_csv.empty()) {
        std::ostringstream csv;
        csv.precision(10);
        csv << "bin_low,bin_high,count\n";
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
          csv << hist.bin_low(b) << ',' << hist.bin_high(b) << ',' << hist.counts[b] << '\n';
        write_text(st_csv, csv.str());
      }
      if (st_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        write_json(st_out, j);
        std::printf("fields %zu  DR %.2f dB  Gini %.4f  mean energy %.2f keV\n", stats.fields, stats.dr_db,
                    stats.gini, stats.mean_energy.mean);
      }
    } else if (*tr) {
      rf::nn::ModelConfig mc;
      rf::train::TrainConfig tc;
      std::uint64_t split_seed = 0;
      if (!tr_config.empty()) {
        const json j = read_json(tr_config);
        if (j.contains("model")) mc = rf::nn::model_config_from_json(j.at("model"));
        if (j.contains("train")) tc = rf::train::train_config_from_json(j.at("train"));
        if (j.contains("split_seed")) split_seed = j.at("split_seed").get<std::uint64_t>();
      }
      tr_model.apply(mc);
      tr_flags.apply(tc);
      if (tr_seed_opt->count()) tc.seed = tr_seed;
      if (tr_split_opt->count()) split_seed = tr_split_seed;

      auto files = rf::list_fields(tr_data);
      if (files.empty()) throw rf::Error(rf::Errc::EmptyDataset, "no .srf files in " + tr_data);
      const auto split = rf::split_dataset(files, split_seed);
      fs::create_directories(tr_out);
      write_json(fs::path(tr_out) / "split.json", split_json(split));
      write_json(fs::path(tr_out) / "config.json",
                 {{"model", rf::nn::to_json(mc)}, {"train", rf::train::to_json(tc)}, {"split_seed", split_seed}});

      rf::nn::Model model(mc, tc.seed);
      rf::train::TrainHooks hooks;
      hooks.dump_dir = tr_out;
      hooks.on_epoch = [](const rf::train::EpochRecord& r) {
        std::printf("epoch %4d  train %.6f  val %.6f  lr %.3g\n", r.epoch, r.train_loss, r.val_loss, r.lr);
        std::fflush(stdout);
      };
      const auto result = rf::train::train(model, split.train, split.val, tc, hooks);
      rf::train::write_history_csv(result.history, fs::path(tr_out) / "history.csv");
      rf::nn::save_checkpoint(model, fs::path(tr_out) / "model.srfm",
                              {{"best_epoch", result.best_epoch}, {"best_val_loss", result.best_val_loss}});
      const auto report = rf::train::evaluate(model, split.test);
      write_json(fs::path(tr_out) / "report.json", rf::eval::to_json(report));
      std::printf("best epoch %d (val %.6f)%s\n", result.best_epoch, result.best_val_loss,
                  result.stopped_early ? ", stopped early" : "");
      std::cout << report.table(rf::nn::to_string(mc.variant));
    } else if (*ev) {
      const auto truth_paths = pick_split(ev_data, ev_model.empty() ? "all" : ev_split, ev_split_seed);
      rf::train::EvalOptions opts;
      if (!ev_kerma.empty()) opts.coeffs = rf::KermaCoefficients::load(ev_kerma);
      opts.pooled_spec_acc = !ev_per_voxel;
      const auto truth = read_all(truth_paths);
      const auto names = names_of(truth_paths);
      rf::eval::MetricReport report;
      std::string label;
      if (!ev_model.empty()) {
        rf::nn::Model model = rf::nn::load_checkpoint(ev_model);
        report = rf::train::evaluate(model, truth, opts, names);
        label = rf::nn::to_string(model.config().variant);
      } else {
        if (ev_pred.empty()) throw rf::Error(rf::Errc::InvalidConfig, "eval needs --model or --pred");
        std::vector<rf::RadiationField> pred;
        for (const auto& p : truth_paths) pred.push_back(rf::read_field(fs::path(ev_pred) / p.filename()));
        report = rf::train::evaluate_fields(truth, pred, opts, names);
        label = "pred";
      }
      if (!ev_out.empty()) write_json(ev_out, rf::eval::to_json(report));
      std::cout << report.table(label);
    } else if (*pr) {
      rf::nn::Model model = rf::nn::load_checkpoint(pr_model);
      rf::BeamParams beam;
      rf::GridDims dims = parse_dims(pr_dims);
      std::array<float, 3> extent = parse_extent(pr_voxel);
      if (!pr_like.empty()) {
        const auto like = rf::read_field(pr_like);
        beam = like.meta;
        dims = like.dims;
        extent = like.voxel_extent;
      } else if (!pr_beam.empty()) {
        beam = rf::beam_from_json(read_json(pr_beam));
      } else {
        throw rf::Error(rf::Errc::InvalidConfig, "predict needs --beam or --like");
      }
      const auto field = rf::nn::infer_field(model, beam, dims, extent, pr_batch, pr_scale);
      rf::write_field(field, pr_out);
      std::printf("wrote %s (%u x %u x %u voxels)\n", pr_out.c_str(), dims.n[0], dims.n[1], dims.n[2]);
    } else if (*be) {
      rf::nn::ModelConfig mc;
      be_flags.apply(mc);
      rf::nn::Model model = be_model.empty() ? rf::nn::Model(mc, be_seed) : rf::nn::load_checkpoint(be_model);
      const rf::GridDims dims = parse_dims(be_dims);
      rf::BeamParams beam;
      beam.tube_spectrum = rf::synth::gen_spectrum(100.0, 4.0, 0.15);
      beam.tube_distance = 0.55;
      const auto t = rf::nn::benchmark_inference(model, beam, dims, be_batch, be_warmup, be_reps);
      std::printf("%s (width %d): inference per field (%u x %u x %u voxels): %s over %d runs\n",
                  rf::nn::to_string(model.config().variant).c_str(), model.config().width, dims.n[0], dims.n[1],
                  dims.n[2], t.format().c_str(), t.reps);
      if (!be_out.empty())
        write_json(be_out, {{"variant", rf::nn::to_string(model.config().variant)},
                            {"width", model.config().width},
                            {"dims", dims.n},
                            {"mean_ms", t.mean_ms},
                            {"std_ms", t.std_ms},
                            {"reps", t.reps},
                            {"warmup", be_warmup}});
    } else if (*hs) {
      rf::nn::ModelConfig mc;
      rf::train::TrainConfig tc;
      if (!hs_config.empty()) {
        const json j = read_json(hs_config);
        if (j.contains("model")) mc = rf::nn::model_config_from_json(j.at("model"));
        if (j.contains("train")) tc = rf::train::train_config_from_json(j.at("train"));
      }
      hs_model.apply(mc);
      hs_flags.apply(tc);
      rf::train::SearchSpace space;
      if (!hs_space.empty()) space = rf::train::search_space_from_json(read_json(hs_space));
      auto files = rf::list_fields(hs_data);
      if (files.empty()) throw rf::Error(rf::Errc::EmptyDataset, "no .srf files in " + hs_data);
      const auto split = rf::split_dataset(files, hs_split_seed);
      const auto trf = read_all(split.train), vaf = read_all(split.val), tef = read_all(split.test);
      rf::train::SearchOptions opts;
      opts.budget = hs_budget;
      opts.mode = rf::train::parse_search_mode(hs_mode);
      opts.trial_epochs = hs_epochs;
      opts.seed = hs_seed;
      opts.out_dir = hs_out;
      opts.on_trial = [](const rf::train::Trial& t) {
        std::printf("trial %zu  width %d  L %d  l_max %d  %s  %s  val %.6f  scatter %.4f\n", t.index, t.model.width,
                    t.model.L, t.model.l_max, rf::nn::to_string(t.model.fusion).c_str(), t.model.norm.name().c_str(),
                    t.val_loss, t.test.smape_acc_scatter);
        std::fflush(stdout);
      };
      const auto trials = rf::train::hyper_search(space, mc, tc, trf, vaf, tef, opts);
      std::printf("best: trial %zu (val %.6f)\n", trials.front().index, trials.front().val_loss);
    } else if (*im) {
      throw rf::Error(rf::Errc::Unimplemented,
                      "format '" + im_format +
                          "' is not built in; convert it to SRF1 with an external converter "
                          "(for RadFiled3D volumes, a script built on the RadFiled3D Python bindings)");
    }
  } catch (const rf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: IoFailure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
