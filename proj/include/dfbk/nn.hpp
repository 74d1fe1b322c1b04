#pragma once

#include "dfbk/blas.hpp"
#include "dfbk/common.hpp"
#include "dfbk/params.hpp"
#include "dfbk/rng.hpp"

namespace dfbk::nn {

// ---------------------------------------------------------------------------
// Elementwise helpers on batches

template <typename T>
Batch<T> silu(const Batch<T>& x);
template <typename T>
Batch<T> silu_backward(const Batch<T>& dy, const Batch<T>& x);

template <typename T>
Batch<T> concat_channels(const Batch<T>& a, const Batch<T>& b);
template <typename T>
void split_channels(const Batch<T>& x, int c_first, Batch<T>& a, Batch<T>& b);

template <typename T>
void add_inplace(Batch<T>& a, const Batch<T>& b);

// ---------------------------------------------------------------------------
// Linear

template <typename T>
struct Linear {
    Mat<T> w;  // in x out
    std::vector<T> b;
    Mat<T> gw;
    std::vector<T> gb;
    bool has_bias = true;

    Linear() = default;
    Linear(int in_dim, int out_dim, RandomStream& rng, bool bias = true, bool zero_init = false);

    Mat<T> forward(const Mat<T>& x, Mat<T>* cache_x) const;
    Mat<T> backward(const Mat<T>& dy, const Mat<T>& x);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// ---------------------------------------------------------------------------
// Conv2d (square kernel, zero padding k/2, stride 1 or 2), NHWC im2col + GEMM

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1;
    Mat<T> w;  // (k*k*in_ch) x out_ch
    std::vector<T> b;
    Mat<T> gw;
    std::vector<T> gb;

    struct Cache {
        Mat<T> col;
        int n = 0, h = 0, w = 0;  // input spatial shape
    };

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride_, RandomStream& rng,
           bool zero_init = false);

    Batch<T> forward(const Batch<T>& x, Cache* cc) const;
    Batch<T> backward(const Batch<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// ---------------------------------------------------------------------------
// GroupNorm over (H, W, channels-per-group), affine

template <typename T>
struct GroupNorm {
    int channels = 0, groups = 1;
    std::vector<T> gamma, beta, ggamma, gbeta;
    static constexpr double kEps = 1e-5;

    struct Cache {
        Batch<T> xhat;
        std::vector<T> inv_std;  // n * groups
    };

    GroupNorm() = default;
    GroupNorm(int channels_, int groups_);

    Batch<T> forward(const Batch<T>& x, Cache* cc) const;
    Batch<T> backward(const Batch<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

int pick_group_count(int channels);

// ---------------------------------------------------------------------------
// Nearest-neighbour 2x upsampling (no parameters)

template <typename T>
Batch<T> upsample_nearest2x(const Batch<T>& x);
template <typename T>
Batch<T> upsample_nearest2x_backward(const Batch<T>& dy);

// ---------------------------------------------------------------------------
// Sinusoidal timestep features

template <typename T>
std::vector<T> sinusoidal_embedding(int t, int dim);

// ---------------------------------------------------------------------------
// Adam with cosine-decayed learning rate handled by the caller

template <typename T>
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<T>> m, v;
    long step_count = 0;

    void init(const ParamList<T>& params);
    void step(const ParamList<T>& params, double lr);
};

double cosine_lr(double lr_start, double lr_end, long step, long total_steps);

}  // namespace dfbk::nn
