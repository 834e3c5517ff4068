#include "rf/srf_io.hpp"

#include <fstream>
#include <zlib.h>

#include "rf/binary.hpp"
#include "rf/error.hpp"
#include "rf/json_io.hpp"

namespace rf {
namespace io {

void ByteWriter::seal() { put<std::uint32_t>(crc32(bytes_)); }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void check_trailer(ByteReader& reader, std::span<const std::uint8_t> bytes) {
  const std::size_t body = reader.position();
  const auto stored = reader.get<std::uint32_t>();
  if (reader.remaining() != 0) throw Error(Errc::ChecksumMismatch, "unexpected trailing bytes");
  if (stored != crc32(bytes.first(body))) throw Error(Errc::ChecksumMismatch, "CRC32 mismatch");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace io

nlohmann::json beam_shape_to_json(const BeamShape& shape) {
  if (const auto* cone = std::get_if<ConeBeam>(&shape))
    return {{"type", "cone"}, {"opening_angle_deg", cone->opening_angle_deg}};
  const auto& rect = std::get<RectBeam>(shape);
  return {{"type", "rect"}, {"width", rect.width}, {"height", rect.height}};
}

BeamShape beam_shape_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "cone") return ConeBeam{j.at("opening_angle_deg").get<double>()};
  if (type == "rect") return RectBeam{j.at("width").get<double>(), j.at("height").get<double>()};
  throw Error(Errc::InvalidConfig, "unknown beam shape '" + type + "'");
}

nlohmann::json beam_to_json(const BeamParams& beam) {
  return {{"direction", beam.direction},
          {"tube_distance", beam.tube_distance},
          {"beam_shape", beam_shape_to_json(beam.shape)},
          {"tube_spectrum", beam.tube_spectrum}};
}

BeamParams beam_from_json(const nlohmann::json& j) {
  BeamParams b;
  b.direction = j.at("direction").get<Vec3>();
  b.tube_distance = j.at("tube_distance").get<double>();
  b.shape = beam_shape_from_json(j.at("beam_shape"));
  b.tube_spectrum = j.at("tube_spectrum").get<std::vector<double>>();
  return b;
}

std::vector<std::uint8_t> encode_field(const RadiationField& field) {
  field.validate();
  io::ByteWriter w;
  w.put_bytes("SRF1");
  w.put<std::uint32_t>(kSrfVersion);
  for (auto n : field.dims.n) w.put<std::uint32_t>(n);
  for (float e : field.voxel_extent) w.put<float>(e);
  if (field.channels.size() > 255) throw Error(Errc::OutOfRange, "too many channels");
  w.put<std::uint8_t>(static_cast<std::uint8_t>(field.channels.size()));
  for (const auto& ch : field.channels) {
    if (ch.name.size() > 255) throw Error(Errc::OutOfRange, "channel name too long");
    w.put<std::uint8_t>(static_cast<std::uint8_t>(ch.name.size()));
    w.put_bytes(ch.name);
    w.put_array<float>(ch.fluence);
    w.put_array<float>(ch.spectra);
    w.put_array<float>(ch.rel_error);
  }
  w.put_array<std::uint8_t>(field.geometry);
  const std::string meta = beam_to_json(field.meta).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  w.put_bytes(meta);
  w.seal();
  return w.bytes();
}

RadiationField decode_field(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, "file shorter than its magic");
  if (r.get_string(4) != "SRF1") throw Error(Errc::BadMagic, "not an SRF1 file");
  const auto version = r.get<std::uint32_t>();
  if (version != kSrfVersion)
    throw Error(Errc::VersionUnsupported, "SRF1 version " + std::to_string(version));

  RadiationField f;
  for (auto& n : f.dims.n) n = r.get<std::uint32_t>();
  for (auto& e : f.voxel_extent) e = r.get<float>();
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(f.dims.n[0]) * f.dims.n[1] * f.dims.n[2];
  if (wide > bytes.size()) throw Error(Errc::TruncatedFile, "payload shorter than declared dims");
  const std::size_t n = f.dims.voxels();
  const auto count = r.get<std::uint8_t>();
  for (std::uint8_t c = 0; c < count; ++c) {
    FieldChannel ch;
    ch.name = r.get_string(r.get<std::uint8_t>());
    ch.fluence = r.get_array<float>(n);
    ch.spectra = r.get_array<float>(n * kFieldBins);
    ch.rel_error = r.get_array<float>(n);
    f.channels.push_back(std::move(ch));
  }
  f.geometry = r.get_array<std::uint8_t>(n);
  const std::string meta = r.get_string(r.get<std::uint32_t>());
  io::check_trailer(r, bytes);
  try {
    f.meta = beam_from_json(nlohmann::json::parse(meta));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("bad metadata block: ") + e.what());
  }
  return f;
}

void write_field(const RadiationField& field, const std::filesystem::path& path) {
  io::write_file(path, encode_field(field));
}

RadiationField read_field(const std::filesystem::path& path) {
  return decode_field(io::read_file(path));
}

}  // namespace rf
