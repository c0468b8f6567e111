#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "mialab/errors.hpp"

namespace mia {

/// Dense n-dimensional array of 64-bit floats, row-major flat storage.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (element_count(shape) != data.size()) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape product " +
                                 std::to_string(element_count(shape)));
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape_) {
        std::vector<double> d(element_count(shape_), 0.0);
        return Tensor(std::move(shape_), std::move(d));
    }

    static Tensor vector(std::vector<double> values) {
        std::vector<std::size_t> s{values.size()};
        return Tensor(std::move(s), std::move(values));
    }

    static std::size_t element_count(const std::vector<std::size_t>& shape_) {
        return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::size_t size() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    /// 2-D access; only valid when shape.size() == 2.
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool operator==(const Tensor& other) const {
        return shape == other.shape && data == other.data;
    }
};

/// Throws NumericError when the tensor holds NaN/Inf.
inline void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value produced in ") + where);
    }
}

inline double squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

} // namespace mia
