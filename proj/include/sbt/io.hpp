#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sbt::io {

/// One decimal key per line; blank lines ignored.
std::vector<uint64_t> read_keys_text(const std::string& path);

/// Little-endian fixed-width records of ceil(k/8) bytes.
std::vector<uint64_t> read_keys_binary(const std::string& path, unsigned k);

void write_keys_text(const std::string& path, const std::vector<uint64_t>& keys);
void write_keys_binary(const std::string& path, const std::vector<uint64_t>& keys, unsigned k);

/// Whole file as raw bytes.
std::vector<uint8_t> read_bytes(const std::string& path);

/// 1-based decimal positions, one per line.
std::vector<size_t> read_positions(const std::string& path);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace sbt::io
