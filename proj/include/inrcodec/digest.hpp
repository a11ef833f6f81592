#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace inrcodec {

std::array<uint8_t, 32> sha256(const uint8_t* data, size_t len);
inline std::array<uint8_t, 32> sha256(const std::vector<uint8_t>& data) { return sha256(data.data(), data.size()); }

// CRC-32 (IEEE reflected polynomial, zlib-compatible).
uint32_t crc32(const uint8_t* data, size_t len);
inline uint32_t crc32(const std::vector<uint8_t>& data) { return crc32(data.data(), data.size()); }

}  // namespace inrcodec
