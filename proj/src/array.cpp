#include "inrcodec/array.hpp"

#include <cmath>

namespace inrcodec {

bool Array::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Array::shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); i++) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace inrcodec
