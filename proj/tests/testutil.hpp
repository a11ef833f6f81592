#pragma once

#include "inrcodec/autodiff.hpp"
#include "inrcodec/rng.hpp"
#include "inrcodec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using namespace inrcodec;

inline Array random_array(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Array a = Array::zeros(std::move(shape));
    for (long i = 0; i < a.size(); i++) a[i] = rng.uniform(lo, hi);
    return a;
}

// Central finite differences of a scalar-valued function of one named leaf.
inline Array fd_gradient(const std::function<double(const Bindings&)>& f, Bindings binds, const std::string& wrt,
                         double h = 1e-5) {
    Array g = Array::zeros(binds.at(wrt).shape());
    for (long i = 0; i < g.size(); i++) {
        Bindings hi = binds, lo = binds;
        hi.at(wrt)[i] += h;
        lo.at(wrt)[i] -= h;
        g[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

inline Array fd_gradient(const Expr& root, const Bindings& binds, const std::string& wrt, double h = 1e-5) {
    return fd_gradient([&](const Bindings& b) { return evaluate(root, b)[0]; }, binds, wrt, h);
}

// Max elementwise deviation normalized by the largest reference magnitude.
inline double max_rel_err(const Array& got, const Array& want) {
    double scale = 1e-6;
    for (long i = 0; i < want.size(); i++) scale = std::max(scale, std::fabs(want[i]));
    double worst = 0;
    for (long i = 0; i < want.size(); i++) worst = std::max(worst, std::fabs(got[i] - want[i]) / scale);
    return worst;
}

inline bool arrays_equal(const Array& a, const Array& b) {
    if (a.shape() != b.shape()) return false;
    for (long i = 0; i < a.size(); i++)
        if (a[i] != b[i]) return false;
    return true;
}

// Synthetic grayscale texture: sum of three random-frequency 2D sinusoids,
// min-max normalized into [0,1].
inline Signal make_texture(int h, int w, Rng& rng) {
    std::vector<double> raw((size_t)h * w);
    double fu[3], fv[3], amp[3], ph[3];
    for (int k = 0; k < 3; k++) {
        fu[k] = rng.uniform(0.5, 3.0);
        fv[k] = rng.uniform(0.5, 3.0);
        amp[k] = rng.uniform(0.3, 1.0);
        ph[k] = rng.uniform(0.0, 2.0 * M_PI);
    }
    for (int r = 0; r < h; r++) {
        double y = h == 1 ? 0.0 : -1.0 + 2.0 * r / (h - 1);
        for (int c = 0; c < w; c++) {
            double x = w == 1 ? 0.0 : -1.0 + 2.0 * c / (w - 1);
            double v = 0;
            for (int k = 0; k < 3; k++) v += amp[k] * std::sin(M_PI * (fu[k] * y + fv[k] * x) + ph[k]);
            raw[(size_t)r * w + c] = v;
        }
    }
    double lo = *std::min_element(raw.begin(), raw.end());
    double hi = *std::max_element(raw.begin(), raw.end());
    Signal s;
    s.modality = Modality::kImage;
    s.feature_shape = {h, w};
    s.channels = 1;
    s.raw_min = lo;
    s.raw_max = hi;
    s.features.resize(raw.size());
    for (size_t i = 0; i < raw.size(); i++) s.features[i] = hi > lo ? (raw[i] - lo) / (hi - lo) : 0.5;
    return s;
}

inline std::vector<Signal> make_textures(int count, int h, int w, uint64_t seed) {
    std::vector<Signal> out;
    Rng rng(seed);
    for (int i = 0; i < count; i++) {
        Rng sub = rng.split(i);
        out.push_back(make_texture(h, w, sub));
    }
    return out;
}

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("inrcodec_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::filesystem::path path() const { return path_; }
    std::string str(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

}  // namespace testutil
