#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace elberto {

// Dense row-major matrix. Vectors are stored as 1 x n.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {}

    static Mat zeros(int r, int c) { return Mat(r, c); }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T* row(int i) {
        assert(i >= 0 && i < rows);
        return v.data() + static_cast<size_t>(i) * cols;
    }
    const T* row(int i) const {
        assert(i >= 0 && i < rows);
        return v.data() + static_cast<size_t>(i) * cols;
    }

    T& at(int i, int j) {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return v[static_cast<size_t>(i) * cols + j];
    }
    T at(int i, int j) const {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return v[static_cast<size_t>(i) * cols + j];
    }

    size_t size() const { return v.size(); }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (T x : v) {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
        return true;
    }
};

}  // namespace elberto
