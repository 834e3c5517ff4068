#include "rf/kerma.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "rf/error.hpp"

namespace rf {

KermaCoefficients KermaCoefficients::unit() {
  KermaCoefficients k;
  k.values.fill(1.0);
  return k;
}

KermaCoefficients KermaCoefficients::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open kerma table " + path.string());
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double v;
    if (ss >> v) vals.push_back(v);
  }
  if (vals.size() != kFieldBins)
    throw Error(Errc::DimensionMismatch, "kerma table must list 32 coefficients, got " +
                                             std::to_string(vals.size()));
  KermaCoefficients k;
  for (std::size_t i = 0; i < kFieldBins; ++i) {
    if (!(vals[i] > 0.0)) throw Error(Errc::OutOfRange, "kerma coefficients must be positive");
    k.values[i] = vals[i];
  }
  return k;
}

std::vector<double> to_kerma(const FieldChannel& channel, const KermaCoefficients& coeffs) {
  const std::size_t n = channel.fluence.size();
  if (channel.spectra.size() != n * coeffs.values.size())
    throw Error(Errc::DimensionMismatch, "spectrum bins do not match coefficient count");
  std::array<double, kFieldBins> weight{};
  for (std::size_t i = 0; i < kFieldBins; ++i) weight[i] = field_bin_mid(i) * coeffs.values[i];
  std::vector<double> out(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    const double phi = channel.fluence[v];
    if (phi == 0.0) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < kFieldBins; ++i) acc += channel.spectra[v * kFieldBins + i] * weight[i];
    out[v] = phi * acc;
  }
  return out;
}

std::vector<double> to_kerma(const RadiationField& field, const KermaCoefficients& coeffs,
                             ChannelSelect which) {
  return to_kerma(select_channel(field, which), coeffs);
}

}  // namespace rf
