#pragma once

#include "dfbk/common.hpp"

namespace dfbk {

// The four half-resolution sub-bands of a single-level orthonormal Haar
// transform. Band naming: lh = low-pass along x / high-pass along y
// (vertical detail), hl = horizontal detail, hh = diagonal.
template <typename T>
struct BandsT {
    Grid<T> ll, lh, hl, hh;
};

using WaveletBands = BandsT<double>;

// Forward transform. Requires even H and W (both >= 2) and finite values.
// Orthonormal scaling: a flat image of 1.0 maps to a flat ll of 2.0 and
// zero detail bands, and total energy is preserved.
template <typename T>
BandsT<T> dwt(const Grid<T>& z) {
    if (z.h < 2 || z.w < 2 || z.h % 2 != 0 || z.w % 2 != 0)
        throw ShapeError("dwt: H and W must be even and >= 2, got " + z.shape_str());
    if (!all_finite(z.v)) throw ValidationError("dwt: non-finite input values");

    const int hh2 = z.h / 2, wh2 = z.w / 2, c = z.c;
    BandsT<T> out{Grid<T>(hh2, wh2, c), Grid<T>(hh2, wh2, c), Grid<T>(hh2, wh2, c),
                  Grid<T>(hh2, wh2, c)};
    for (int y = 0; y < hh2; ++y) {
        for (int x = 0; x < wh2; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                const T a = z.at(2 * y, 2 * x, ch);
                const T b = z.at(2 * y, 2 * x + 1, ch);
                const T cc = z.at(2 * y + 1, 2 * x, ch);
                const T d = z.at(2 * y + 1, 2 * x + 1, ch);
                out.ll.at(y, x, ch) = (a + b + cc + d) / 2;
                out.lh.at(y, x, ch) = (a + b - cc - d) / 2;
                out.hl.at(y, x, ch) = (a - b + cc - d) / 2;
                out.hh.at(y, x, ch) = (a - b - cc + d) / 2;
            }
        }
    }
    return out;
}

// Exact inverse of dwt; the 2x2 Haar matrix is orthonormal and symmetric,
// so reconstruction uses the same +-1/2 coefficients.
template <typename T>
Grid<T> iwt(const BandsT<T>& bands) {
    const Grid<T>& ll = bands.ll;
    if (!ll.same_shape(bands.lh) || !ll.same_shape(bands.hl) || !ll.same_shape(bands.hh))
        throw ShapeError("iwt: band shapes differ (ll " + ll.shape_str() + ", lh " +
                         bands.lh.shape_str() + ", hl " + bands.hl.shape_str() + ", hh " +
                         bands.hh.shape_str() + ")");
    Grid<T> z(ll.h * 2, ll.w * 2, ll.c);
    for (int y = 0; y < ll.h; ++y) {
        for (int x = 0; x < ll.w; ++x) {
            for (int ch = 0; ch < ll.c; ++ch) {
                const T l = ll.at(y, x, ch);
                const T v = bands.lh.at(y, x, ch);
                const T hz = bands.hl.at(y, x, ch);
                const T d = bands.hh.at(y, x, ch);
                z.at(2 * y, 2 * x, ch) = (l + v + hz + d) / 2;
                z.at(2 * y, 2 * x + 1, ch) = (l + v - hz - d) / 2;
                z.at(2 * y + 1, 2 * x, ch) = (l - v + hz - d) / 2;
                z.at(2 * y + 1, 2 * x + 1, ch) = (l - v - hz + d) / 2;
            }
        }
    }
    return z;
}

// Stacks the three detail bands along the channel axis, ordered [lh|hl|hh].
template <typename T>
Grid<T> concat_high(const BandsT<T>& bands) {
    if (!bands.lh.same_shape(bands.hl) || !bands.lh.same_shape(bands.hh))
        throw ShapeError("concat_high: detail band shapes differ");
    const int h = bands.lh.h, w = bands.lh.w, c = bands.lh.c;
    Grid<T> out(h, w, 3 * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                out.at(y, x, ch) = bands.lh.at(y, x, ch);
                out.at(y, x, c + ch) = bands.hl.at(y, x, ch);
                out.at(y, x, 2 * c + ch) = bands.hh.at(y, x, ch);
            }
    return out;
}

// Exact inverse of concat_high.
template <typename T>
void split_high(const Grid<T>& zh, Grid<T>& lh, Grid<T>& hl, Grid<T>& hh) {
    if (zh.c % 3 != 0)
        throw ShapeError("split_high: channel count " + std::to_string(zh.c) +
                         " not divisible by 3");
    const int c = zh.c / 3;
    lh = Grid<T>(zh.h, zh.w, c);
    hl = Grid<T>(zh.h, zh.w, c);
    hh = Grid<T>(zh.h, zh.w, c);
    for (int y = 0; y < zh.h; ++y)
        for (int x = 0; x < zh.w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                lh.at(y, x, ch) = zh.at(y, x, ch);
                hl.at(y, x, ch) = zh.at(y, x, c + ch);
                hh.at(y, x, ch) = zh.at(y, x, 2 * c + ch);
            }
}

}  // namespace dfbk
