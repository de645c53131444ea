#pragma once

// Little-endian container files: 8-byte magic, u32 version, u64 header
// length, JSON header, then a raw blob. Offsets in headers are relative to the
// start of the blob.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfce/error.hpp"

namespace mfce::binio {

inline void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void append_f64(std::string& out, std::span<const double> values) {
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    append_u64(out, bits);
  }
}

inline void append_i32(std::string& out, std::int32_t v) {
  append_u32(out, static_cast<std::uint32_t>(v));
}

inline std::uint64_t load_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

inline std::uint32_t load_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

inline std::vector<double> load_f64(const std::string& blob, std::uint64_t offset,
                                    std::size_t count) {
  if (offset + count * 8 > blob.size()) throw IoError("blob truncated");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = load_u64(blob.data() + offset + 8 * i);
    std::memcpy(&values[i], &bits, sizeof bits);
  }
  return values;
}

inline std::vector<std::int32_t> load_i32(const std::string& blob, std::uint64_t offset,
                                          std::size_t count) {
  if (offset + count * 4 > blob.size()) throw IoError("blob truncated");
  std::vector<std::int32_t> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = static_cast<std::int32_t>(load_u32(blob.data() + offset + 4 * i));
  }
  return values;
}

struct Container {
  nlohmann::json header;
  std::string blob;
};

inline void write_container(const std::filesystem::path& path, const std::string& magic,
                            std::uint32_t version, const nlohmann::json& header,
                            const std::string& blob) {
  std::string text = header.dump();
  std::string prefix = magic;
  append_u32(prefix, version);
  append_u64(prefix, text.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline Container read_container(const std::filesystem::path& path, const std::string& magic,
                                std::uint32_t version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t fixed = magic.size() + 12;
  if (bytes.size() < fixed || bytes.compare(0, magic.size(), magic) != 0) {
    throw IoError(path.string() + ": not a " + magic + " file");
  }
  if (load_u32(bytes.data() + magic.size()) != version) {
    throw IoError(path.string() + ": unsupported version");
  }
  const std::uint64_t header_len = load_u64(bytes.data() + magic.size() + 4);
  if (fixed + header_len > bytes.size()) throw IoError(path.string() + ": header truncated");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(fixed, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  c.blob = bytes.substr(fixed + header_len);
  return c;
}

}  // namespace mfce::binio
