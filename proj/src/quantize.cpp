#include "inrcodec/quantize.hpp"

#include "inrcodec/range_coder.hpp"

#include <algorithm>
#include <cmath>

namespace inrcodec {

void QuantizerParams::validate() const {
    if (bits < 1 || bits > 16) throw ValueError("quantizer bits must be in [1,16]");
    if (mu.rank() != 1 || !mu.same_shape(sigma)) throw ShapeError("quantizer mu/sigma must be matching vectors");
    for (long i = 0; i < sigma.size(); i++)
        if (sigma[i] < 0) throw ValueError("quantizer sigma must be non-negative");
}

QuantizerParams calibrate(const std::vector<Modulations>& corpus, int bits) {
    if (corpus.empty()) throw ValueError("calibrate: empty corpus");
    const long d = corpus[0].latent.size();
    for (const auto& m : corpus)
        if (m.latent.size() != d) throw ShapeError("calibrate: inconsistent modulation lengths");

    QuantizerParams qp;
    qp.bits = bits;
    qp.clip_k = 3.0;
    qp.mu = Array::zeros({(int)d});
    qp.sigma = Array::zeros({(int)d});
    const double n = (double)corpus.size();
    for (const auto& m : corpus)
        for (long i = 0; i < d; i++) qp.mu[i] += m.latent[i];
    for (long i = 0; i < d; i++) qp.mu[i] /= n;
    for (const auto& m : corpus)
        for (long i = 0; i < d; i++) {
            double dev = m.latent[i] - qp.mu[i];
            qp.sigma[i] += dev * dev;
        }
    for (long i = 0; i < d; i++) qp.sigma[i] = std::sqrt(qp.sigma[i] / n);
    qp.validate();
    return qp;
}

SymbolStream quantize(const Modulations& phi, const QuantizerParams& qp) {
    qp.validate();
    if (phi.latent.size() != qp.mu.size())
        throw ShapeError("quantize: modulation length " + std::to_string(phi.latent.size()) + " vs " +
                         std::to_string(qp.mu.size()));
    SymbolStream out((size_t)phi.latent.size());
    const int top = qp.n_bins() - 1;
    for (long i = 0; i < phi.latent.size(); i++) {
        if (qp.degenerate((int)i)) {
            out[i] = 0;
            continue;
        }
        const double lo = qp.mu[i] - qp.clip_k * qp.sigma[i];
        const double hi = qp.mu[i] + qp.clip_k * qp.sigma[i];
        const double v = std::clamp(phi.latent[i], lo, hi);
        long s = (long)std::floor((v - lo) / qp.bin_width((int)i));
        out[i] = (uint16_t)std::clamp(s, 0l, (long)top);
    }
    return out;
}

Modulations dequantize(const SymbolStream& symbols, const QuantizerParams& qp) {
    qp.validate();
    if ((long)symbols.size() != qp.mu.size())
        throw ShapeError("dequantize: symbol count " + std::to_string(symbols.size()) + " vs " +
                         std::to_string(qp.mu.size()));
    Modulations phi{Array::zeros({(int)symbols.size()})};
    for (size_t i = 0; i < symbols.size(); i++) {
        if (symbols[i] >= qp.n_bins()) throw ValueError("dequantize: symbol out of range");
        if (qp.degenerate((int)i)) {
            phi.latent[(long)i] = qp.mu[(long)i];
            continue;
        }
        const double lo = qp.mu[(long)i] - qp.clip_k * qp.sigma[(long)i];
        phi.latent[(long)i] = lo + (symbols[i] + 0.5) * qp.bin_width((int)i);
    }
    return phi;
}

double coin_clip_multiplier(int bits) {
    if (bits < 1 || bits > 16) throw ValueError("coin_clip_multiplier: bits must be in [1,16]");
    return 3.0 + 3.0 * (bits - 1) / 15.0;
}

namespace {

// Scalar uniform quantize-dequantize of one pooled parameter group.
void quantize_group(std::vector<double*>& values, int bits, double k) {
    if (values.empty()) return;
    double mu = 0;
    for (double* v : values) mu += *v;
    mu /= (double)values.size();
    double var = 0;
    for (double* v : values) var += (*v - mu) * (*v - mu);
    double sigma = std::sqrt(var / (double)values.size());
    if (sigma <= 0) {
        for (double* v : values) *v = mu;
        return;
    }
    const int bins = 1 << bits;
    const double lo = mu - k * sigma;
    const double w = 2.0 * k * sigma / bins;
    for (double* v : values) {
        double c = std::clamp(*v, lo, mu + k * sigma);
        long s = std::clamp((long)std::floor((c - lo) / w), 0l, (long)bins - 1);
        *v = lo + (s + 0.5) * w;
    }
}

}  // namespace

BaseParams coin_weight_quantize(const BaseParams& theta, int bits) {
    const double k = coin_clip_multiplier(bits);
    BaseParams q = theta;
    std::vector<double*> weights, biases;
    for (auto& w : q.weights)
        for (long i = 0; i < w.size(); i++) weights.push_back(&w[i]);
    for (long i = 0; i < q.w_out.size(); i++) weights.push_back(&q.w_out[i]);
    for (auto& m : q.map_shift)
        for (long i = 0; i < m.size(); i++) weights.push_back(&m[i]);
    for (auto& m : q.map_scale)
        for (long i = 0; i < m.size(); i++) weights.push_back(&m[i]);
    for (auto& b : q.biases)
        for (long i = 0; i < b.size(); i++) biases.push_back(&b[i]);
    for (long i = 0; i < q.b_out.size(); i++) biases.push_back(&q.b_out[i]);
    quantize_group(weights, bits, k);
    quantize_group(biases, bits, k);
    return q;
}

FrequencyModel build_freq(const SymbolStream& corpus, int bits) {
    if (bits < 1 || bits > 16) throw ValueError("build_freq: bits must be in [1,16]");
    const int n = 1 << bits;
    FrequencyModel fm;
    fm.bits = bits;
    fm.counts.assign((size_t)n, 1);  // add-one smoothing
    for (uint16_t s : corpus) {
        if (s >= n) throw ValueError("build_freq: symbol " + std::to_string(s) + " out of range for " +
                                     std::to_string(bits) + " bits");
        fm.counts[s]++;
    }
    // The range coder divides its 32-bit range by the total; keep the total
    // under 2^24 so the quotient never collapses to zero.
    auto total_of = [&] {
        uint64_t t = 0;
        for (uint32_t c : fm.counts) t += c;
        return t;
    };
    while (total_of() >= (1u << 24))
        for (auto& c : fm.counts) c = std::max(1u, c / 2);
    fm.total = (uint32_t)total_of();
    fm.cum.assign((size_t)n + 1, 0);
    for (int i = 0; i < n; i++) fm.cum[i + 1] = fm.cum[i] + fm.counts[i];
    return fm;
}

double FrequencyModel::cross_entropy_bits(const SymbolStream& symbols) const {
    double bits_sum = 0;
    for (uint16_t s : symbols) bits_sum += -std::log2((double)counts[s] / (double)total);
    return bits_sum;
}

std::vector<uint8_t> ac_encode(const SymbolStream& symbols, const FrequencyModel& fm) {
    RangeEncoder enc;
    for (uint16_t s : symbols) {
        if (s >= fm.counts.size()) throw ValueError("ac_encode: symbol out of range");
        enc.encode(fm.cum[s], fm.counts[s], fm.total);
    }
    return enc.finish();
}

SymbolStream ac_decode(const std::vector<uint8_t>& bytes, size_t n_symbols, const FrequencyModel& fm) {
    SymbolStream out;
    out.reserve(n_symbols);
    if (n_symbols == 0) return out;
    RangeDecoder dec(bytes.data(), bytes.size());
    for (size_t i = 0; i < n_symbols; i++) {
        uint32_t target = dec.decode_target(fm.total);
        size_t s = (size_t)(std::upper_bound(fm.cum.begin(), fm.cum.end(), target) - fm.cum.begin()) - 1;
        dec.consume(fm.cum[s], fm.counts[s]);
        out.push_back((uint16_t)s);
    }
    return out;
}

}  // namespace inrcodec
