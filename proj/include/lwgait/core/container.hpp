#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwgait/core/error.hpp"

namespace lwgait {

using json = nlohmann::ordered_json;

// One binary container for every artifact in the repo: 4 magic bytes,
// little-endian uint32 header length, UTF-8 JSON header, then a raw
// f32 little-endian payload. Feature stacks and checkpoints differ only
// in their header schema.
struct Container {
  json header;
  std::vector<float> payload;
};

inline void write_container(const std::string& path, const char magic[4], const json& header,
                            const std::vector<float>& payload) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open for write: " + path);
  f.write(magic, 4);
  const std::string h = header.dump();
  const uint32_t len = static_cast<uint32_t>(h.size());
  unsigned char lenb[4] = {static_cast<unsigned char>(len & 0xff),
                           static_cast<unsigned char>((len >> 8) & 0xff),
                           static_cast<unsigned char>((len >> 16) & 0xff),
                           static_cast<unsigned char>((len >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(lenb), 4);
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  if (!payload.empty())
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  require(f.good(), ErrorCode::io, "write failed: " + path);
}

// expected_floats < 0 skips the payload size check (caller validates).
inline Container read_container(const std::string& path, const char magic[4],
                                int64_t expected_floats = -1) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open: " + path);
  char m[4];
  f.read(m, 4);
  require(f.gcount() == 4 && std::memcmp(m, magic, 4) == 0, ErrorCode::format,
          "bad magic in " + path);
  unsigned char lenb[4];
  f.read(reinterpret_cast<char*>(lenb), 4);
  require(f.gcount() == 4, ErrorCode::format, "truncated header length in " + path);
  const uint32_t len = static_cast<uint32_t>(lenb[0]) | (static_cast<uint32_t>(lenb[1]) << 8) |
                       (static_cast<uint32_t>(lenb[2]) << 16) | (static_cast<uint32_t>(lenb[3]) << 24);
  std::string h(len, '\0');
  f.read(h.data(), static_cast<std::streamsize>(len));
  require(f.gcount() == static_cast<std::streamsize>(len), ErrorCode::format,
          "truncated header in " + path);
  Container c;
  try {
    c.header = json::parse(h);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::format, std::string("invalid header json: ") + e.what());
  }
  // read the remainder as payload
  std::vector<char> rest((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(rest.size() % sizeof(float) == 0, ErrorCode::integrity,
          "payload not a whole number of f32 values in " + path);
  c.payload.resize(rest.size() / sizeof(float));
  if (!rest.empty()) std::memcpy(c.payload.data(), rest.data(), rest.size());
  if (expected_floats >= 0)
    require(static_cast<int64_t>(c.payload.size()) == expected_floats, ErrorCode::integrity,
            "payload size does not match header in " + path);
  return c;
}

}  // namespace lwgait
