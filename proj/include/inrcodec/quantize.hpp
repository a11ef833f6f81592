#pragma once

#include "inrcodec/siren.hpp"

#include <vector>

namespace inrcodec {

using SymbolStream = std::vector<uint16_t>;

// Uniform quantizer over [mu - k*sigma, mu + k*sigma] per dimension with 2^bits
// bins. Dimensions with zero calibration deviation are degenerate: they always
// emit symbol 0 and reconstruct their mean.
struct QuantizerParams {
    int bits = 5;          // in [1, 16]
    double clip_k = 3.0;   // modulations clip at 3 standard deviations
    Array mu, sigma;       // per-dimension statistics, rank 1

    int n_bins() const { return 1 << bits; }
    int dims() const { return (int)mu.size(); }
    bool degenerate(int i) const { return sigma[i] <= 0.0; }
    double bin_width(int i) const { return 2.0 * clip_k * sigma[i] / n_bins(); }
    void validate() const;
};

// Per-dimension mean and population standard deviation over the corpus.
QuantizerParams calibrate(const std::vector<Modulations>& corpus, int bits);

SymbolStream quantize(const Modulations& phi, const QuantizerParams& qp);
Modulations dequantize(const SymbolStream& symbols, const QuantizerParams& qp);

// COIN baseline rule: clip range k(b) = 3 + 3*(b-1)/15, statistics pooled over
// all weight entries and all bias entries separately.
double coin_clip_multiplier(int bits);
BaseParams coin_weight_quantize(const BaseParams& theta, int bits);

// Empirical symbol distribution with add-one smoothing; total is kept below
// the range coder's 2^24 precision bound by halving when necessary.
struct FrequencyModel {
    int bits = 0;
    std::vector<uint32_t> counts;  // 2^bits entries, each >= 1
    std::vector<uint32_t> cum;     // 2^bits + 1 entries, cum[0] = 0
    uint32_t total = 0;

    double cross_entropy_bits(const SymbolStream& symbols) const;
};

FrequencyModel build_freq(const SymbolStream& corpus, int bits);

std::vector<uint8_t> ac_encode(const SymbolStream& symbols, const FrequencyModel& fm);
SymbolStream ac_decode(const std::vector<uint8_t>& bytes, size_t n_symbols, const FrequencyModel& fm);

}  // namespace inrcodec
