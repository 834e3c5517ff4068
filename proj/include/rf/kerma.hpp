#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "rf/field.hpp"

namespace rf {

/// One air mass energy-absorption coefficient per field spectrum bin.
struct KermaCoefficients {
  std::array<double, kFieldBins> values{};

  /// All ones; kerma then reduces to fluence times mean energy.
  static KermaCoefficients unit();
  /// Text table, one positive value per line (32 lines, '#' comments allowed).
  static KermaCoefficients load(const std::filesystem::path& path);
};

/// K[v] = fluence[v] * sum_i p_i[v] * E_mid,i * coeff_i
std::vector<double> to_kerma(const FieldChannel& channel, const KermaCoefficients& coeffs);
std::vector<double> to_kerma(const RadiationField& field, const KermaCoefficients& coeffs,
                             ChannelSelect which = ChannelSelect::Total);

}  // namespace rf
