#pragma once

#include "inrcodec/array.hpp"

#include <cstdint>
#include <vector>

namespace inrcodec {

// Integer range coder, normative bitstream: 32-bit low/range state, carry
// propagation into already-emitted bytes, renormalization when the range
// drops below 2^24, and a final 4-byte flush of the low register. Bytes are
// emitted most-significant first.
class RangeEncoder {
  public:
    void encode(uint32_t cum_freq, uint32_t freq, uint32_t total);
    std::vector<uint8_t> finish();

  private:
    void shift_out();
    std::vector<uint8_t> out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
};

class RangeDecoder {
  public:
    RangeDecoder(const uint8_t* bytes, size_t len);
    // Returns a value in [0, total); the caller locates the symbol whose
    // cumulative interval contains it, then commits with consume().
    uint32_t decode_target(uint32_t total);
    void consume(uint32_t cum_freq, uint32_t freq);

  private:
    uint8_t next_byte();
    const uint8_t* p_;
    const uint8_t* end_;
    uint64_t code_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t r_ = 0;
};

}  // namespace inrcodec
