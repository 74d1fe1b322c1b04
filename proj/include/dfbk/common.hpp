#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfbk {

// Raised when tensor/matrix dimensions do not line up.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when values violate a contract (non-finite input, empty sequence, ...).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an on-disk artifact is malformed (bad magic, truncation, ...).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// H x W x C feature map, row-major [y][x][c].
template <typename T>
struct Grid {
    int h = 0, w = 0, c = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int h_, int w_, int c_, T fill = T(0)) : h(h_), w(w_), c(c_) {
        if (h_ <= 0 || w_ <= 0 || c_ <= 0)
            throw ShapeError("Grid: dimensions must be positive, got " + shape_str(h_, w_, c_));
        v.assign(static_cast<size_t>(h_) * w_ * c_, fill);
    }

    T& at(int y, int x, int ch) { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }
    const T& at(int y, int x, int ch) const { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }

    size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return h == o.h && w == o.w && c == o.c; }
    std::string shape_str() const { return shape_str(h, w, c); }

    static std::string shape_str(int h, int w, int c) {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }

    template <typename U>
    Grid<U> cast() const {
        Grid<U> out(h, w, c);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

// Dense row-major matrix used for token sequences and projection weights.
template <typename T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c, T fill = T(0)) : rows(r), cols(c) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
        v.assign(static_cast<size_t>(r) * c, fill);
    }

    T& at(int r, int c_) { return v[static_cast<size_t>(r) * cols + c_]; }
    const T& at(int r, int c_) const { return v[static_cast<size_t>(r) * cols + c_]; }
    size_t size() const { return v.size(); }

    template <typename U>
    Mat<U> cast() const {
        Mat<U> out(rows, cols);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

// N x H x W x C batch, C innermost (matches Grid layout per sample).
template <typename T>
struct Batch {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Batch() = default;
    Batch(int n_, int h_, int w_, int c_, T fill = T(0)) : n(n_), h(h_), w(w_), c(c_) {
        v.assign(static_cast<size_t>(n_) * h_ * w_ * c_, fill);
    }

    T& at(int i, int y, int x, int ch) {
        return v[((static_cast<size_t>(i) * h + y) * w + x) * c + ch];
    }
    const T& at(int i, int y, int x, int ch) const {
        return v[((static_cast<size_t>(i) * h + y) * w + x) * c + ch];
    }

    size_t sample_size() const { return static_cast<size_t>(h) * w * c; }

    Grid<T> sample(int i) const {
        Grid<T> g(h, w, c);
        std::copy(v.begin() + i * sample_size(), v.begin() + (i + 1) * sample_size(), g.v.begin());
        return g;
    }
    void set_sample(int i, const Grid<T>& g) {
        if (g.h != h || g.w != w || g.c != c)
            throw ShapeError("Batch::set_sample: sample shape " + g.shape_str() + " does not match batch");
        std::copy(g.v.begin(), g.v.end(), v.begin() + i * sample_size());
    }
};

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename T>
void require_finite(const Grid<T>& g, const char* what) {
    if (!all_finite(g.v)) throw ValidationError(std::string(what) + ": non-finite values");
}

using FeatureMap = Grid<double>;

}  // namespace dfbk
