#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "rf/nn/model.hpp"

namespace rf::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "SRFM" | u32 version | u32 len + JSON header | u32 tensor count |
/// per tensor: u16 name len, name, u32 rows, u32 cols, f32 data |
/// CRC32 of everything before it.
/// The header carries the model config (with the normalizer spec), the init
/// seed and caller-supplied metadata. Values are stored as f32.
std::vector<std::uint8_t> encode_checkpoint(const Model& model, const nlohmann::json& meta = {});
Model decode_checkpoint(std::span<const std::uint8_t> bytes, nlohmann::json* meta = nullptr);

void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& meta = {});
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

/// Round every parameter to the nearest f32, i.e. what a save/load cycle does.
void round_to_f32(Model& model);

}  // namespace rf::nn
