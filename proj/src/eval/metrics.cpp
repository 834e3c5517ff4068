#include "rf/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rf/error.hpp"

namespace rf::eval {
namespace {

double max_of(std::span<const double> t) {
  double m = 0.0;
  for (double v : t) m = std::max(m, v);
  return m;
}

struct Offset {
  std::int64_t di, dj, dk;
  double dist2;  // squared distance normalized by delta_d^2
};

std::vector<Offset> stencil(const std::array<float, 3>& ext, double delta_d) {
  std::array<std::int64_t, 3> reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<std::int64_t>(std::floor(delta_d / ext[a] + 1e-9));
  const double limit = delta_d * delta_d + 1e-9;
  std::vector<Offset> out;
  for (std::int64_t k = -reach[2]; k <= reach[2]; ++k)
    for (std::int64_t j = -reach[1]; j <= reach[1]; ++j)
      for (std::int64_t i = -reach[0]; i <= reach[0]; ++i) {
        const double x = i * static_cast<double>(ext[0]), y = j * static_cast<double>(ext[1]),
                     z = k * static_cast<double>(ext[2]);
        const double d2 = x * x + y * y + z * z;
        if (d2 <= limit) out.push_back({i, j, k, d2 / (delta_d * delta_d)});
      }
  std::sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) { return a.dist2 < b.dist2; });
  return out;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::DimensionMismatch, "reference and prediction sizes differ");
}

}  // namespace

std::vector<std::size_t> select_voxels(std::span<const double> t, const Selector& sel) {
  const double mx = max_of(t);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool in = sel.kind == Selector::Kind::Top ? t[i] > mx * (100.0 - sel.percent) / 100.0
                                                    : (t[i] >= 0.005 * mx && t[i] < 0.05 * mx);
    if (in) out.push_back(i);
  }
  return out;
}

double SmapeSums::accuracy() const {
  if (count == 0) throw Error(Errc::EmptySelection, "no voxel matches the selector");
  return 1.0 - (error / static_cast<double>(count)) / 2.0;
}

SmapeSums smape_sums(std::span<const double> t, std::span<const double> p, const Selector& sel) {
  check_same(t.size(), p.size());
  SmapeSums s;
  for (std::size_t i : select_voxels(t, sel)) {
    const double den = (std::abs(p[i]) + std::abs(t[i])) / 2.0;
    if (den > 0.0) s.error += std::abs(p[i] - t[i]) / den;
    ++s.count;
  }
  return s;
}

double smape_acc(std::span<const double> t, std::span<const double> p, const Selector& sel) {
  return smape_sums(t, p, sel).accuracy();
}

std::string GammaCriterion::label() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "gpr_%gpct_%gcm", delta_dose * 100.0, delta_d_cm);
  return buf;
}

std::vector<std::uint8_t> gamma_pass_map(std::span<const double> t, std::span<const double> p, const GridDims& dims,
                                         const std::array<float, 3>& voxel_extent, const GammaCriterion& crit) {
  check_same(t.size(), p.size());
  check_same(t.size(), dims.voxels());
  if (!(crit.delta_d_cm > 0.0) || !(crit.delta_dose > 0.0))
    throw Error(Errc::InvalidConfig, "gamma criterion values must be positive");
  const double delta_d = crit.delta_d_cm / 100.0;
  const float min_ext = *std::min_element(voxel_extent.begin(), voxel_extent.end());
  if (delta_d + 1e-12 < static_cast<double>(min_ext))
    throw Error(Errc::CriterionSmallerThanVoxel, "distance criterion is smaller than a voxel");

  const double delta_dose = crit.delta_dose * max_of(t);
  const auto offsets = stencil(voxel_extent, delta_d);
  const auto nx = static_cast<std::int64_t>(dims.n[0]), ny = static_cast<std::int64_t>(dims.n[1]),
             nz = static_cast<std::int64_t>(dims.n[2]);
  std::vector<std::uint8_t> pass(t.size(), 0);
  for (std::int64_t k = 0; k < nz; ++k)
    for (std::int64_t j = 0; j < ny; ++j)
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::size_t x = dims.index(i, j, k);
        for (const Offset& o : offsets) {
          const std::int64_t a = i + o.di, b = j + o.dj, c = k + o.dk;
          if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
          const double diff = p[x] - t[dims.index(a, b, c)];
          double dose2;
          if (delta_dose > 0.0)
            dose2 = (diff / delta_dose) * (diff / delta_dose);
          else
            dose2 = diff == 0.0 ? 0.0 : INFINITY;
          if (o.dist2 + dose2 <= 1.0) {
            pass[x] = 1;
            break;
          }
        }
      }
  return pass;
}

double gpr(std::span<const double> t, std::span<const double> p, const GridDims& dims,
           const std::array<float, 3>& voxel_extent, const GammaCriterion& crit) {
  const auto pass = gamma_pass_map(t, p, dims, voxel_extent, crit);
  std::size_t n = 0;
  for (auto v : pass) n += v;
  return static_cast<double>(n) / static_cast<double>(pass.size());
}

OverlapSums overlap_sums(std::span<const float> t_spectra, std::span<const float> p_spectra,
                         std::span<const std::uint8_t> mask) {
  check_same(t_spectra.size(), p_spectra.size());
  if (t_spectra.size() % kFieldBins != 0) throw Error(Errc::DimensionMismatch, "spectra are not 32-bin rows");
  const std::size_t voxels = t_spectra.size() / kFieldBins;
  if (!mask.empty()) check_same(mask.size(), voxels);
  OverlapSums s;
  for (std::size_t v = 0; v < voxels; ++v) {
    if (!mask.empty() && !mask[v]) continue;
    for (std::size_t b = 0; b < kFieldBins; ++b) {
      const double tv = t_spectra[v * kFieldBins + b], pv = p_spectra[v * kFieldBins + b];
      const double mn = std::min(tv, pv);
      s.intersection += mn;
      s.union_ += tv + pv - mn;
    }
  }
  return s;
}

double spec_acc(std::span<const float> t_spectra, std::span<const float> p_spectra, std::span<const std::uint8_t> mask,
                bool pooled) {
  if (pooled) return overlap_sums(t_spectra, p_spectra, mask).ratio();
  check_same(t_spectra.size(), p_spectra.size());
  const std::size_t voxels = t_spectra.size() / kFieldBins;
  if (!mask.empty()) check_same(mask.size(), voxels);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < voxels; ++v) {
    if (!mask.empty() && !mask[v]) continue;
    acc += overlap_sums(t_spectra.subspan(v * kFieldBins, kFieldBins), p_spectra.subspan(v * kFieldBins, kFieldBins))
               .ratio();
    ++n;
  }
  return n > 0 ? acc / static_cast<double>(n) : 1.0;
}

namespace {

constexpr const char* kColumns[] = {"smape_acc_90", "smape_acc_scatter", "ssim",          "gpr_3pct_6cm",
                                    "gpr_10pct_4cm", "gpr_3pct_4cm",     "gpr_10pct_6cm", "spec_acc"};

template <class T>
std::array<double*, 8> slots(T& m) {
  return {&m.smape_acc_90, &m.smape_acc_scatter, &m.ssim,          &m.gpr_3pct_6cm,
          &m.gpr_10pct_4cm, &m.gpr_3pct_4cm,     &m.gpr_10pct_6cm, &m.spec_acc};
}

template <class T>
nlohmann::json values_json(const T& m) {
  nlohmann::json j = nlohmann::json::object();
  auto s = slots(const_cast<T&>(m));
  for (std::size_t i = 0; i < s.size(); ++i) j[kColumns[i]] = *s[i];
  return j;
}

template <class T>
void values_from(const nlohmann::json& j, T& m) {
  auto s = slots(m);
  // NaN (an empty selection) is written as null.
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& v = j.at(kColumns[i]);
    *s[i] = v.is_null() ? std::nan("") : v.get<double>();
  }
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = values_json(r);
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : r.fields) {
    nlohmann::json e = values_json(f);
    e["name"] = f.name;
    fields.push_back(std::move(e));
  }
  j["fields"] = std::move(fields);
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    values_from(j, r);
    if (j.contains("fields"))
      for (const auto& e : j.at("fields")) {
        FieldMetrics f;
        values_from(e, f);
        f.name = e.at("name").get<std::string>();
        r.fields.push_back(std::move(f));
      }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("metric report: ") + e.what());
  }
  return r;
}

std::string MetricReport::table(const std::string& label) const {
  const char* heads[] = {"SMAPE_acc^90", "SMAPE_acc^scatter", "SSIM",          "GPR 3%/6cm",
                         "GPR 10%/4cm",  "GPR 3%/4cm",        "GPR 10%/6cm",   "Spec_acc"};
  std::size_t label_w = std::max<std::size_t>(label.size(), 5);
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_w), "Model");
  os << buf;
  for (const char* h : heads) {
    std::snprintf(buf, sizeof(buf), "  %17s", h);
    os << buf;
  }
  os << '\n';
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_w), label.c_str());
  os << buf;
  auto vals = slots(const_cast<MetricReport&>(*this));
  for (double* v : vals) {
    std::snprintf(buf, sizeof(buf), "  %17.4f", *v);
    os << buf;
  }
  os << '\n';
  return os.str();
}

}  // namespace rf::eval
