#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace inrcodec {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct ValueError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct CodecError : Error {
    using Error::Error;
};

// Dense 64-bit real array, rank 0 (scalar), 1 (vector) or 2 (matrix), row-major.
class Array {
  public:
    Array() : shape_{}, v_(1, 0.0) {}  // scalar zero

    static Array scalar(double x) {
        Array a;
        a.v_[0] = x;
        return a;
    }
    static Array zeros(std::vector<int> shape) {
        Array a;
        a.shape_ = std::move(shape);
        a.v_.assign(count(a.shape_), 0.0);
        return a;
    }
    static Array full(std::vector<int> shape, double x) {
        Array a = zeros(std::move(shape));
        for (auto& e : a.v_) e = x;
        return a;
    }
    Array(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), v_(std::move(data)) {
        if ((long)v_.size() != count(shape_))
            throw ShapeError("Array: data size " + std::to_string(v_.size()) + " does not match shape " +
                             shape_str(shape_));
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return (int)shape_.size(); }
    long size() const { return (long)v_.size(); }
    int rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
    int cols() const { return rank() == 2 ? shape_[1] : 1; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double& operator[](long i) { return v_[i]; }
    double operator[](long i) const { return v_[i]; }
    double& at(int r, int c) { return v_[(long)r * shape_[1] + c]; }
    double at(int r, int c) const { return v_[(long)r * shape_[1] + c]; }

    bool same_shape(const Array& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    static long count(const std::vector<int>& shape) {
        long n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    static std::string shape_str(const std::vector<int>& shape);

  private:
    std::vector<int> shape_;
    std::vector<double> v_;
};

}  // namespace inrcodec
