#include "dfbk/nn.hpp"

#include <cmath>

namespace dfbk::nn {

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Batch<T> silu(const Batch<T>& x) {
    Batch<T> y = x;
    for (auto& v : y.v) {
        const T s = T(1) / (T(1) + std::exp(-v));
        v = v * s;
    }
    return y;
}

template <typename T>
Batch<T> silu_backward(const Batch<T>& dy, const Batch<T>& x) {
    Batch<T> dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x.v[i]));
        dx.v[i] *= s * (T(1) + x.v[i] * (T(1) - s));
    }
    return dx;
}

template <typename T>
Batch<T> concat_channels(const Batch<T>& a, const Batch<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("concat_channels: spatial shape mismatch");
    Batch<T> out(a.n, a.h, a.w, a.c + b.c);
    for (int i = 0; i < a.n; ++i)
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                for (int ch = 0; ch < a.c; ++ch) out.at(i, y, x, ch) = a.at(i, y, x, ch);
                for (int ch = 0; ch < b.c; ++ch) out.at(i, y, x, a.c + ch) = b.at(i, y, x, ch);
            }
    return out;
}

template <typename T>
void split_channels(const Batch<T>& x, int c_first, Batch<T>& a, Batch<T>& b) {
    a = Batch<T>(x.n, x.h, x.w, c_first);
    b = Batch<T>(x.n, x.h, x.w, x.c - c_first);
    for (int i = 0; i < x.n; ++i)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                for (int ch = 0; ch < c_first; ++ch) a.at(i, y, xx, ch) = x.at(i, y, xx, ch);
                for (int ch = c_first; ch < x.c; ++ch)
                    b.at(i, y, xx, ch - c_first) = x.at(i, y, xx, ch);
            }
}

template <typename T>
void add_inplace(Batch<T>& a, const Batch<T>& b) {
    if (a.v.size() != b.v.size()) throw ShapeError("add_inplace: size mismatch");
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(int in_dim, int out_dim, RandomStream& rng, bool bias, bool zero_init)
    : has_bias(bias) {
    w = Mat<T>(in_dim, out_dim);
    if (!zero_init) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (auto& x : w.v) x = static_cast<T>(scale * rng.normal());
    }
    gw = Mat<T>(in_dim, out_dim);
    if (has_bias) {
        b.assign(out_dim, T(0));
        gb.assign(out_dim, T(0));
    }
}

template <typename T>
Mat<T> Linear<T>::forward(const Mat<T>& x, Mat<T>* cache_x) const {
    if (x.cols != w.rows) throw ShapeError("Linear: input dim mismatch");
    Mat<T> y = matmul(x, w);
    if (has_bias)
        for (int r = 0; r < y.rows; ++r)
            for (int c = 0; c < y.cols; ++c) y.at(r, c) += b[c];
    if (cache_x) *cache_x = x;
    return y;
}

template <typename T>
Mat<T> Linear<T>::backward(const Mat<T>& dy, const Mat<T>& x) {
    matmul_tn_acc(x, dy, gw);
    if (has_bias)
        for (int r = 0; r < dy.rows; ++r)
            for (int c = 0; c < dy.cols; ++c) gb[c] += dy.at(r, c);
    return matmul_nt(dy, w);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".w", &w.v, &gw.v});
    if (has_bias) out.push_back({prefix + ".b", &b, &gb});
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride_, RandomStream& rng,
                  bool zero_init)
    : in_ch(in_channels), out_ch(out_channels), ksize(kernel), stride(stride_) {
    const int fan_in = kernel * kernel * in_channels;
    w = Mat<T>(fan_in, out_channels);
    if (!zero_init) {
        const double scale = std::sqrt(2.0 / fan_in);
        for (auto& x : w.v) x = static_cast<T>(scale * rng.normal());
    }
    b.assign(out_channels, T(0));
    gw = Mat<T>(fan_in, out_channels);
    gb.assign(out_channels, T(0));
}

namespace {

template <typename T>
Mat<T> im2col(const Batch<T>& x, int ksize, int stride, int ho, int wo) {
    const int pad = ksize / 2;
    Mat<T> col(x.n * ho * wo, ksize * ksize * x.c);
    size_t row = 0;
    for (int i = 0; i < x.n; ++i)
        for (int yo = 0; yo < ho; ++yo)
            for (int xo = 0; xo < wo; ++xo, ++row) {
                T* dst = &col.v[row * col.cols];
                for (int ky = 0; ky < ksize; ++ky) {
                    const int yi = yo * stride + ky - pad;
                    for (int kx = 0; kx < ksize; ++kx) {
                        const int xi = xo * stride + kx - pad;
                        T* cell = dst + (ky * ksize + kx) * x.c;
                        if (yi >= 0 && yi < x.h && xi >= 0 && xi < x.w) {
                            const T* src = &x.v[((static_cast<size_t>(i) * x.h + yi) * x.w + xi) *
                                                x.c];
                            for (int ch = 0; ch < x.c; ++ch) cell[ch] = src[ch];
                        } else {
                            for (int ch = 0; ch < x.c; ++ch) cell[ch] = T(0);
                        }
                    }
                }
            }
    return col;
}

template <typename T>
Batch<T> col2im(const Mat<T>& dcol, int n, int h, int w, int c, int ksize, int stride, int ho,
                int wo) {
    const int pad = ksize / 2;
    Batch<T> dx(n, h, w, c);
    size_t row = 0;
    for (int i = 0; i < n; ++i)
        for (int yo = 0; yo < ho; ++yo)
            for (int xo = 0; xo < wo; ++xo, ++row) {
                const T* src = &dcol.v[row * dcol.cols];
                for (int ky = 0; ky < ksize; ++ky) {
                    const int yi = yo * stride + ky - pad;
                    if (yi < 0 || yi >= h) continue;
                    for (int kx = 0; kx < ksize; ++kx) {
                        const int xi = xo * stride + kx - pad;
                        if (xi < 0 || xi >= w) continue;
                        const T* cell = src + (ky * ksize + kx) * c;
                        T* dst = &dx.v[((static_cast<size_t>(i) * h + yi) * w + xi) * c];
                        for (int ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
                    }
                }
            }
    return dx;
}

}  // namespace

template <typename T>
Batch<T> Conv2d<T>::forward(const Batch<T>& x, Cache* cc) const {
    if (x.c != in_ch)
        throw ShapeError("Conv2d: input channels " + std::to_string(x.c) + " != " +
                         std::to_string(in_ch));
    const int ho = (x.h + 2 * (ksize / 2) - ksize) / stride + 1;
    const int wo = (x.w + 2 * (ksize / 2) - ksize) / stride + 1;
    Mat<T> col = im2col(x, ksize, stride, ho, wo);
    Mat<T> y = matmul(col, w);
    Batch<T> out(x.n, ho, wo, out_ch);
    for (int r = 0; r < y.rows; ++r)
        for (int c = 0; c < out_ch; ++c) out.v[static_cast<size_t>(r) * out_ch + c] =
            y.at(r, c) + b[c];
    if (cc) {
        cc->col = std::move(col);
        cc->n = x.n;
        cc->h = x.h;
        cc->w = x.w;
    }
    return out;
}

template <typename T>
Batch<T> Conv2d<T>::backward(const Batch<T>& dy, const Cache& cc) {
    Mat<T> dy_mat(dy.n * dy.h * dy.w, out_ch);
    std::copy(dy.v.begin(), dy.v.end(), dy_mat.v.begin());

    matmul_tn_acc(cc.col, dy_mat, gw);
    for (int r = 0; r < dy_mat.rows; ++r)
        for (int c = 0; c < out_ch; ++c) gb[c] += dy_mat.at(r, c);

    Mat<T> dcol = matmul_nt(dy_mat, w);
    return col2im(dcol, cc.n, cc.h, cc.w, in_ch, ksize, stride, dy.h, dy.w);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".w", &w.v, &gw.v});
    out.push_back({prefix + ".b", &b, &gb});
}

// ---------------------------------------------------------------------------
// GroupNorm

int pick_group_count(int channels) {
    for (int g : {8, 4, 2})
        if (channels % g == 0) return g;
    return 1;
}

template <typename T>
GroupNorm<T>::GroupNorm(int channels_, int groups_) : channels(channels_), groups(groups_) {
    if (channels % groups != 0) throw ShapeError("GroupNorm: channels not divisible by groups");
    gamma.assign(channels, T(1));
    beta.assign(channels, T(0));
    ggamma.assign(channels, T(0));
    gbeta.assign(channels, T(0));
}

template <typename T>
Batch<T> GroupNorm<T>::forward(const Batch<T>& x, Cache* cc) const {
    if (x.c != channels) throw ShapeError("GroupNorm: channel mismatch");
    const int cg = channels / groups;
    Batch<T> y(x.n, x.h, x.w, x.c);
    Batch<T> xhat(x.n, x.h, x.w, x.c);
    std::vector<T> inv_std(static_cast<size_t>(x.n) * groups);
    const size_t spatial = static_cast<size_t>(x.h) * x.w;
    const double count = static_cast<double>(spatial * cg);

    for (int i = 0; i < x.n; ++i) {
        for (int g = 0; g < groups; ++g) {
            double mean = 0;
            for (size_t p = 0; p < spatial; ++p) {
                const T* px = &x.v[(static_cast<size_t>(i) * spatial + p) * channels + g * cg];
                for (int ch = 0; ch < cg; ++ch) mean += px[ch];
            }
            mean /= count;
            double var = 0;
            for (size_t p = 0; p < spatial; ++p) {
                const T* px = &x.v[(static_cast<size_t>(i) * spatial + p) * channels + g * cg];
                for (int ch = 0; ch < cg; ++ch) {
                    const double dlt = px[ch] - mean;
                    var += dlt * dlt;
                }
            }
            var /= count;
            const T istd = static_cast<T>(1.0 / std::sqrt(var + kEps));
            inv_std[static_cast<size_t>(i) * groups + g] = istd;
            for (size_t p = 0; p < spatial; ++p) {
                const size_t base = (static_cast<size_t>(i) * spatial + p) * channels + g * cg;
                for (int ch = 0; ch < cg; ++ch) {
                    const T xh = static_cast<T>((x.v[base + ch] - mean)) * istd;
                    xhat.v[base + ch] = xh;
                    y.v[base + ch] = gamma[g * cg + ch] * xh + beta[g * cg + ch];
                }
            }
        }
    }
    if (cc) {
        cc->xhat = std::move(xhat);
        cc->inv_std = std::move(inv_std);
    }
    return y;
}

template <typename T>
Batch<T> GroupNorm<T>::backward(const Batch<T>& dy, const Cache& cc) {
    const Batch<T>& xhat = cc.xhat;
    const int cg = channels / groups;
    const size_t spatial = static_cast<size_t>(xhat.h) * xhat.w;
    const double count = static_cast<double>(spatial * cg);
    Batch<T> dx(xhat.n, xhat.h, xhat.w, xhat.c);

    for (size_t p = 0; p < static_cast<size_t>(xhat.n) * spatial; ++p)
        for (int ch = 0; ch < channels; ++ch) {
            ggamma[ch] += dy.v[p * channels + ch] * xhat.v[p * channels + ch];
            gbeta[ch] += dy.v[p * channels + ch];
        }

    for (int i = 0; i < xhat.n; ++i) {
        for (int g = 0; g < groups; ++g) {
            double sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (size_t p = 0; p < spatial; ++p) {
                const size_t base = (static_cast<size_t>(i) * spatial + p) * channels + g * cg;
                for (int ch = 0; ch < cg; ++ch) {
                    const double dxh = static_cast<double>(dy.v[base + ch]) * gamma[g * cg + ch];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat.v[base + ch];
                }
            }
            const double mean_dxhat = sum_dxhat / count;
            const double mean_dxhat_xhat = sum_dxhat_xhat / count;
            const T istd = cc.inv_std[static_cast<size_t>(i) * groups + g];
            for (size_t p = 0; p < spatial; ++p) {
                const size_t base = (static_cast<size_t>(i) * spatial + p) * channels + g * cg;
                for (int ch = 0; ch < cg; ++ch) {
                    const double dxh = static_cast<double>(dy.v[base + ch]) * gamma[g * cg + ch];
                    dx.v[base + ch] = static_cast<T>(
                        istd * (dxh - mean_dxhat - xhat.v[base + ch] * mean_dxhat_xhat));
                }
            }
        }
    }
    return dx;
}

template <typename T>
void GroupNorm<T>::collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggamma});
    out.push_back({prefix + ".beta", &beta, &gbeta});
}

// ---------------------------------------------------------------------------
// Upsampling

template <typename T>
Batch<T> upsample_nearest2x(const Batch<T>& x) {
    Batch<T> y(x.n, x.h * 2, x.w * 2, x.c);
    for (int i = 0; i < x.n; ++i)
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx)
                for (int ch = 0; ch < x.c; ++ch)
                    y.at(i, yy, xx, ch) = x.at(i, yy / 2, xx / 2, ch);
    return y;
}

template <typename T>
Batch<T> upsample_nearest2x_backward(const Batch<T>& dy) {
    Batch<T> dx(dy.n, dy.h / 2, dy.w / 2, dy.c);
    for (int i = 0; i < dy.n; ++i)
        for (int yy = 0; yy < dy.h; ++yy)
            for (int xx = 0; xx < dy.w; ++xx)
                for (int ch = 0; ch < dy.c; ++ch)
                    dx.at(i, yy / 2, xx / 2, ch) += dy.at(i, yy, xx, ch);
    return dx;
}

// ---------------------------------------------------------------------------
// Timestep features

template <typename T>
std::vector<T> sinusoidal_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<T> emb(dim, T(0));
    for (int i = 0; i < half; ++i) {
        const double freq =
            half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
        emb[i] = static_cast<T>(std::sin(t * freq));
        emb[half + i] = static_cast<T>(std::cos(t * freq));
    }
    return emb;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
void Adam<T>::init(const ParamList<T>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p.value->size(), T(0));
        v.emplace_back(p.value->size(), T(0));
    }
    step_count = 0;
}

template <typename T>
void Adam<T>::step(const ParamList<T>& params, double lr) {
    if (m.size() != params.size()) throw ShapeError("Adam: optimizer state mismatch");
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t p = 0; p < params.size(); ++p) {
        auto& value = *params[p].value;
        auto& grad = *params[p].grad;
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[p][i] = static_cast<T>(beta1 * m[p][i] + (1.0 - beta1) * g);
            v[p][i] = static_cast<T>(beta2 * v[p][i] + (1.0 - beta2) * g * g);
            const double mhat = m[p][i] / bc1;
            const double vhat = v[p][i] / bc2;
            value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

double cosine_lr(double lr_start, double lr_end, long step, long total_steps) {
    if (total_steps <= 0) return lr_start;
    const double frac = std::min(1.0, static_cast<double>(step) / total_steps);
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

// ---------------------------------------------------------------------------

#define DFBK_INSTANTIATE(T)                                                       \
    template Batch<T> silu(const Batch<T>&);                                      \
    template Batch<T> silu_backward(const Batch<T>&, const Batch<T>&);            \
    template Batch<T> concat_channels(const Batch<T>&, const Batch<T>&);          \
    template void split_channels(const Batch<T>&, int, Batch<T>&, Batch<T>&);     \
    template void add_inplace(Batch<T>&, const Batch<T>&);                        \
    template struct Linear<T>;                                                    \
    template struct Conv2d<T>;                                                    \
    template struct GroupNorm<T>;                                                 \
    template Batch<T> upsample_nearest2x(const Batch<T>&);                        \
    template Batch<T> upsample_nearest2x_backward(const Batch<T>&);               \
    template std::vector<T> sinusoidal_embedding(int, int);                       \
    template struct Adam<T>;

DFBK_INSTANTIATE(float)
DFBK_INSTANTIATE(double)
#undef DFBK_INSTANTIATE

}  // namespace dfbk::nn
