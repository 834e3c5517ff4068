#pragma once

#include <filesystem>
#include <vector>

#include "rf/field.hpp"

namespace rf {

inline constexpr std::uint32_t kSrfVersion = 1;

/// SRF1 container: magic, version, dims, voxel extent, named channels
/// (fluence, spectra, rel_error as f32), geometry bytes, JSON beam metadata,
/// trailing CRC32 over every preceding byte.
std::vector<std::uint8_t> encode_field(const RadiationField& field);
RadiationField decode_field(std::span<const std::uint8_t> bytes);

void write_field(const RadiationField& field, const std::filesystem::path& path);
RadiationField read_field(const std::filesystem::path& path);

}  // namespace rf
