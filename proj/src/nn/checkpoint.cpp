#include "rf/nn/checkpoint.hpp"

#include <map>

#include "rf/binary.hpp"

namespace rf::nn {

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const nlohmann::json& meta) {
  io::ByteWriter w;
  w.put_bytes("SRFM");
  w.put<std::uint32_t>(kCheckpointVersion);
  nlohmann::json header = {{"config", to_json(model.config())}, {"seed", model.seed()}};
  if (!meta.is_null()) header["meta"] = meta;
  const std::string text = header.dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);

  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p->name.size()));
    w.put_bytes(p->name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.cols()));
    std::vector<float> data(static_cast<std::size_t>(p->value.size()));
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(p->value.data()[i]);
    w.put_array<float>(data);
  }
  w.seal();
  return w.bytes();
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes, nlohmann::json* meta) {
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, "checkpoint shorter than its magic");
  io::ByteReader r(bytes);
  if (r.get_string(4) != "SRFM") throw Error(Errc::BadMagic, "not a model checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error(Errc::VersionUnsupported, "checkpoint version " + std::to_string(version));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.get_string(r.get<std::uint32_t>()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("checkpoint header: ") + e.what());
  }

  std::map<std::string, Matrix> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.get_string(r.get<std::uint16_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto data = r.get_array<float>(static_cast<std::size_t>(rows) * cols);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) m.data()[i] = data[i];
    tensors.emplace(std::move(name), std::move(m));
  }
  io::check_trailer(r, bytes);

  ModelConfig config;
  std::uint64_t seed = 0;
  if (!header.contains("config") || !header["config"].contains("normalizer"))
    throw Error(Errc::MissingNormalizer, "checkpoint carries no normalizer spec");
  try {
    config = model_config_from_json(header.at("config"));
    seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("checkpoint header: ") + e.what());
  }
  Model model(config, seed);
  for (Parameter* p : model.parameters()) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw Error(Errc::ShapeMismatch, "checkpoint lacks tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw Error(Errc::ShapeMismatch, "tensor " + p->name + " has the wrong shape");
    p->value = it->second;
  }
  if (tensors.size() != model.parameters().size())
    throw Error(Errc::ShapeMismatch, "checkpoint holds unexpected tensors");
  if (meta) *meta = header.contains("meta") ? header.at("meta") : nlohmann::json::object();
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& meta) {
  io::write_file(path, encode_checkpoint(model, meta));
}

Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint(bytes, meta);
}

void round_to_f32(Model& model) {
  for (Parameter* p : model.parameters())
    p->value = p->value.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace rf::nn
