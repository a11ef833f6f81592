#include "inrcodec/range_coder.hpp"

namespace inrcodec {

void RangeEncoder::encode(uint32_t cum_freq, uint32_t freq, uint32_t total) {
    if (freq == 0 || cum_freq + freq > total) throw ValueError("range coder: invalid frequency interval");
    const uint32_t r = range_ / total;
    low_ += (uint64_t)r * cum_freq;
    range_ = r * freq;
    if (low_ > 0xFFFFFFFFull) {
        // Carry: increment the emitted byte stream. It cannot run off the
        // front because low + range never exceeds the coding window.
        size_t i = out_.size();
        while (true) {
            if (i == 0) throw Error("range coder: carry past stream start");
            if (out_[i - 1] != 0xFF) {
                out_[i - 1]++;
                break;
            }
            out_[i - 1] = 0;
            i--;
        }
        low_ &= 0xFFFFFFFFull;
    }
    while (range_ < (1u << 24)) {
        shift_out();
        range_ <<= 8;
    }
}

void RangeEncoder::shift_out() {
    out_.push_back((uint8_t)(low_ >> 24));
    low_ = (low_ << 8) & 0xFFFFFFFFull;
}

std::vector<uint8_t> RangeEncoder::finish() {
    for (int i = 0; i < 4; i++) shift_out();
    return std::move(out_);
}

RangeDecoder::RangeDecoder(const uint8_t* bytes, size_t len) : p_(bytes), end_(bytes + len) {
    for (int i = 0; i < 4; i++) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
    if (p_ >= end_) throw CodecError("range coder: truncated input");
    return *p_++;
}

uint32_t RangeDecoder::decode_target(uint32_t total) {
    r_ = range_ / total;
    uint64_t target = code_ / r_;
    return (uint32_t)(target >= total ? total - 1 : target);
}

void RangeDecoder::consume(uint32_t cum_freq, uint32_t freq) {
    code_ -= (uint64_t)r_ * cum_freq;
    range_ = r_ * freq;
    while (range_ < (1u << 24)) {
        code_ = ((code_ << 8) | next_byte()) & 0xFFFFFFFFull;
        range_ <<= 8;
    }
}

}  // namespace inrcodec
