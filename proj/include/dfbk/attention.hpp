#pragma once

#include "dfbk/blas.hpp"
#include "dfbk/common.hpp"
#include "dfbk/params.hpp"
#include "dfbk/rng.hpp"

namespace dfbk {

// Learnable reparameterization of the differential-attention gain:
//   lambda = exp(q1.k1) - exp(q2.k2) + lambda_init
// with the dot products clamped to [-20, 20] before exponentiation.
template <typename T>
struct LambdaParams {
    std::vector<T> q1, k1, q2, k2;
    std::vector<T> gq1, gk1, gq2, gk2;
    T init = T(0.8);

    LambdaParams() = default;
    LambdaParams(int dim, T init_value, RandomStream& rng) : init(init_value) {
        auto draw = [&](std::vector<T>& v) {
            v.resize(dim);
            for (auto& x : v) x = static_cast<T>(0.1 * rng.normal());
        };
        draw(q1);
        draw(k1);
        draw(q2);
        draw(k2);
        gq1.assign(dim, T(0));
        gk1.assign(dim, T(0));
        gq2.assign(dim, T(0));
        gk2.assign(dim, T(0));
    }

    T value() const;
    // Accumulates d(loss)/d(vectors) given d(loss)/d(lambda).
    void backward(T dlambda);
    void collect(const std::string& prefix, ParamList<T>& out);

    static constexpr double kClamp = 20.0;
};

template <typename T>
T lambda_value(const LambdaParams<T>& p) {
    return p.value();
}

namespace detail {

// Row-wise softmax with max subtraction; rows sum to 1 exactly up to rounding.
template <typename T>
void softmax_rows(Mat<T>& m);

// dS for S -> softmax(S) = A given dA.
template <typename T>
Mat<T> softmax_backward(const Mat<T>& attn, const Mat<T>& dattn);

// Extract/insert contiguous head slices (columns [h*d, (h+1)*d)).
template <typename T>
Mat<T> head_slice(const Mat<T>& m, int head, int head_dim);
template <typename T>
void head_insert(Mat<T>& dst, const Mat<T>& src, int head, int head_dim);

}  // namespace detail

// Multi-head scaled dot-product self-attention:
//   per head, out = softmax(Q K^T / sqrt(d)) V; heads concatenated, then
//   projected by wo back to the token width.
template <typename T>
struct SelfAttention {
    int heads = 1;
    Mat<T> wq, wk, wv, wo;
    Mat<T> gwq, gwk, gwv, gwo;

    struct Cache {
        Mat<T> x, q, k, v, merged;
        std::vector<Mat<T>> attn;  // one row-stochastic matrix per head
    };

    SelfAttention() = default;
    SelfAttention(int token_dim, int model_dim, int num_heads, RandomStream& rng,
                  bool zero_out_proj);

    int model_dim() const { return wq.cols; }
    int head_dim() const { return wq.cols / heads; }

    Mat<T> forward(const Mat<T>& tokens, Cache* cc) const;
    Mat<T> backward(const Mat<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// Differential self-attention: two independent Q/K projection pairs share a
// value projection, combined as softmax1 - lambda * softmax2. Combined
// weight rows sum to 1 - lambda.
template <typename T>
struct DiffAttention {
    int heads = 1;
    Mat<T> wq1, wk1, wq2, wk2, wv, wo;
    Mat<T> gwq1, gwk1, gwq2, gwk2, gwv, gwo;

    struct Cache {
        Mat<T> x, q1, k1, q2, k2, v, merged;
        std::vector<Mat<T>> attn1, attn2;
        T lambda = T(0);
    };

    DiffAttention() = default;
    DiffAttention(int token_dim, int model_dim, int num_heads, RandomStream& rng,
                  bool zero_out_proj);

    int model_dim() const { return wq1.cols; }
    int head_dim() const { return wq1.cols / heads; }

    Mat<T> forward(const Mat<T>& tokens, const LambdaParams<T>& lp, Cache* cc) const;
    Mat<T> backward(const Mat<T>& dy, const Cache& cc, LambdaParams<T>& lp);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// Cross-attention from token queries onto an external context sequence
// (keys and values projected from the context rows).
template <typename T>
struct CrossAttention {
    int heads = 1;
    Mat<T> wq, wk, wv, wo;  // wk, wv: ctx_dim x model_dim
    Mat<T> gwq, gwk, gwv, gwo;

    struct Cache {
        Mat<T> x, ctx, q, k, v, merged;
        std::vector<Mat<T>> attn;
    };

    CrossAttention() = default;
    CrossAttention(int token_dim, int ctx_dim, int model_dim, int num_heads, RandomStream& rng,
                   bool zero_out_proj);

    int model_dim() const { return wq.cols; }
    int head_dim() const { return wq.cols / heads; }

    Mat<T> forward(const Mat<T>& tokens, const Mat<T>& context, Cache* cc) const;
    Mat<T> backward(const Mat<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// Differential cross-attention: two key projections of the context, one
// value projection, combined as softmax1 - lambda * softmax2.
template <typename T>
struct DiffCrossAttention {
    int heads = 1;
    Mat<T> wq1, wq2, wk1, wk2, wv, wo;
    Mat<T> gwq1, gwq2, gwk1, gwk2, gwv, gwo;

    struct Cache {
        Mat<T> x, ctx, q1, q2, k1, k2, v, merged;
        std::vector<Mat<T>> attn1, attn2;
        T lambda = T(0);
    };

    DiffCrossAttention() = default;
    DiffCrossAttention(int token_dim, int ctx_dim, int model_dim, int num_heads, RandomStream& rng,
                       bool zero_out_proj);

    int model_dim() const { return wq1.cols; }
    int head_dim() const { return wq1.cols / heads; }

    Mat<T> forward(const Mat<T>& tokens, const Mat<T>& context, const LambdaParams<T>& lp,
                   Cache* cc) const;
    Mat<T> backward(const Mat<T>& dy, const Cache& cc, LambdaParams<T>& lp);
    void collect(const std::string& prefix, ParamList<T>& out);
};

extern template struct LambdaParams<float>;
extern template struct LambdaParams<double>;
extern template struct SelfAttention<float>;
extern template struct SelfAttention<double>;
extern template struct DiffAttention<float>;
extern template struct DiffAttention<double>;
extern template struct CrossAttention<float>;
extern template struct CrossAttention<double>;
extern template struct DiffCrossAttention<float>;
extern template struct DiffCrossAttention<double>;

}  // namespace dfbk
