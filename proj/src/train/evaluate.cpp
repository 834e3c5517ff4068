#include "rf/train/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "rf/eval/ssim.hpp"
#include "rf/nn/infer.hpp"
#include "rf/srf_io.hpp"

namespace rf::train {
namespace {

const eval::GammaCriterion k3pct6cm{6.0, 0.03};
const eval::GammaCriterion k10pct4cm{4.0, 0.10};
const eval::GammaCriterion k3pct4cm{4.0, 0.03};
const eval::GammaCriterion k10pct6cm{6.0, 0.10};

struct PassCount {
  std::size_t pass = 0;
  std::size_t total = 0;
  double ratio() const { return total ? static_cast<double>(pass) / static_cast<double>(total) : 1.0; }
};

PassCount count_pass(std::span<const double> t, std::span<const double> p, const RadiationField& f,
                     const eval::GammaCriterion& c) {
  const auto map = eval::gamma_pass_map(t, p, f.dims, f.voxel_extent, c);
  PassCount pc;
  for (auto v : map) pc.pass += v;
  pc.total = map.size();
  return pc;
}

double field_accuracy(const eval::SmapeSums& s) { return s.count ? s.accuracy() : NAN; }

}  // namespace

eval::MetricReport evaluate_fields(std::span<const RadiationField> truth, std::span<const RadiationField> pred,
                                   const EvalOptions& opts, std::span<const std::string> names) {
  if (truth.empty()) throw Error(Errc::EmptySplit, "no fields to evaluate");
  if (truth.size() != pred.size()) throw Error(Errc::DimensionMismatch, "truth and prediction counts differ");

  eval::MetricReport report;
  eval::SmapeSums top, scat;
  PassCount g36, g104, g34, g106;
  eval::OverlapSums overlap;
  double ssim_sum = 0.0, spec_mean_sum = 0.0;

  for (std::size_t i = 0; i < truth.size(); ++i) {
    const RadiationField& tf = truth[i];
    const RadiationField& pf = pred[i];
    if (tf.dims != pf.dims) throw Error(Errc::DimensionMismatch, "prediction grid differs from truth grid");
    const auto t = to_kerma(tf, opts.coeffs, ChannelSelect::Total);
    const auto p = to_kerma(pf, opts.coeffs, ChannelSelect::Total);
    const FieldChannel tc = select_channel(tf, ChannelSelect::Total);
    const FieldChannel pc = select_channel(pf, ChannelSelect::Total);
    std::vector<std::uint8_t> mask(tc.fluence.size());
    for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = tc.fluence[v] > 0.0f;

    eval::FieldMetrics fm;
    fm.name = i < names.size() ? names[i] : "field_" + std::to_string(i);
    const auto s90 = eval::smape_sums(t, p, eval::Selector::top(90.0));
    const auto ssc = eval::smape_sums(t, p, eval::Selector::scatter());
    top.add(s90);
    scat.add(ssc);
    fm.smape_acc_90 = field_accuracy(s90);
    fm.smape_acc_scatter = field_accuracy(ssc);
    fm.ssim = eval::ssim3d(std::span<const double>(t), std::span<const double>(p), tf.dims);
    ssim_sum += fm.ssim;

    const PassCount a = count_pass(t, p, tf, k3pct6cm), b = count_pass(t, p, tf, k10pct4cm),
                    c = count_pass(t, p, tf, k3pct4cm), d = count_pass(t, p, tf, k10pct6cm);
    fm.gpr_3pct_6cm = a.ratio();
    fm.gpr_10pct_4cm = b.ratio();
    fm.gpr_3pct_4cm = c.ratio();
    fm.gpr_10pct_6cm = d.ratio();
    for (auto [acc, x] : {std::pair{&g36, a}, {&g104, b}, {&g34, c}, {&g106, d}}) {
      acc->pass += x.pass;
      acc->total += x.total;
    }

    const auto ov = eval::overlap_sums(tc.spectra, pc.spectra, mask);
    overlap.add(ov);
    fm.spec_acc = opts.pooled_spec_acc ? ov.ratio() : eval::spec_acc(tc.spectra, pc.spectra, mask, false);
    spec_mean_sum += fm.spec_acc;
    report.fields.push_back(std::move(fm));
  }

  const double n = static_cast<double>(truth.size());
  report.smape_acc_90 = top.accuracy();
  report.smape_acc_scatter = scat.accuracy();
  report.ssim = ssim_sum / n;
  report.gpr_3pct_6cm = g36.ratio();
  report.gpr_10pct_4cm = g104.ratio();
  report.gpr_3pct_4cm = g34.ratio();
  report.gpr_10pct_6cm = g106.ratio();
  report.spec_acc = opts.pooled_spec_acc ? overlap.ratio() : spec_mean_sum / n;
  return report;
}

eval::MetricReport evaluate(nn::Model& model, std::span<const RadiationField> test_fields, const EvalOptions& opts,
                            std::span<const std::string> names) {
  if (test_fields.empty()) throw Error(Errc::EmptySplit, "test split is empty");
  std::vector<RadiationField> preds;
  preds.reserve(test_fields.size());
  for (const RadiationField& f : test_fields) {
    const FieldChannel total = select_channel(f, ChannelSelect::Total);
    const double peak = *std::max_element(total.fluence.begin(), total.fluence.end());
    preds.push_back(nn::infer_field(model, f.meta, f.dims, f.voxel_extent, opts.batch, peak > 0.0 ? peak : 1.0));
  }
  return evaluate_fields(test_fields, preds, opts, names);
}

eval::MetricReport evaluate(nn::Model& model, const std::vector<std::filesystem::path>& test_paths,
                            const EvalOptions& opts) {
  std::vector<RadiationField> fields;
  std::vector<std::string> names;
  for (const auto& p : test_paths) {
    fields.push_back(read_field(p));
    names.push_back(p.filename().string());
  }
  return evaluate(model, fields, opts, names);
}

}  // namespace rf::train
