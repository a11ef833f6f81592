#pragma once

#include "inrcodec/array.hpp"

#include <cmath>
#include <limits>

namespace inrcodec {

// PSNR in dB on [0,1]-normalized features: -10*log10(MSE). A zero MSE is
// reported as +infinity; CSV writers cap it (see psnr_db_capped).
inline double psnr_db(double mse) {
    if (mse < 0) throw ValueError("psnr: negative MSE");
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

constexpr double kPsnrCapDb = 100.0;

inline double psnr_db_capped(double mse) {
    double p = psnr_db(mse);
    return p > kPsnrCapDb ? kPsnrCapDb : p;
}

inline double mean_squared_error(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw ValueError("mse: size mismatch or empty");
    double s = 0;
    for (size_t i = 0; i < a.size(); i++) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / (double)a.size();
}

}  // namespace inrcodec
