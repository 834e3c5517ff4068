#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rf/error.hpp"

namespace rf::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order, which must be little-endian");

/// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  template <class T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  template <class T>
  void put_array(std::span<const T> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  /// Appends the CRC32 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; running past the end raises TruncatedFile.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  template <class T>
  std::vector<T> get_array(std::size_t count) {
    if (count > remaining() / sizeof(T)) throw Error(Errc::TruncatedFile, "payload ends early");
    std::vector<T> out(count);
    std::memcpy(out.data(), take(count * sizeof(T)), count * sizeof(T));
    return out;
  }
  std::string get_string(std::size_t len) {
    const auto* p = take(len);
    return std::string(reinterpret_cast<const char*>(p), len);
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > remaining()) throw Error(Errc::TruncatedFile, "payload ends early");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Verifies the trailing CRC32 once the reader sits right before it.
void check_trailer(ByteReader& reader, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rf::io
