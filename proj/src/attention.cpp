#include "dfbk/attention.hpp"

#include <algorithm>
#include <cmath>

namespace dfbk {

namespace {

template <typename T>
Mat<T> random_weight(int rows, int cols, RandomStream& rng) {
    Mat<T> w(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (auto& x : w.v) x = static_cast<T>(scale * rng.normal());
    return w;
}

template <typename T>
void check_tokens(const Mat<T>& tokens, int expected_dim, const char* who) {
    if (tokens.rows < 1) throw ValidationError(std::string(who) + ": empty token sequence");
    if (tokens.cols != expected_dim)
        throw ShapeError(std::string(who) + ": token dim " + std::to_string(tokens.cols) +
                         " != expected " + std::to_string(expected_dim));
}

template <typename T>
void check_context(const Mat<T>& ctx, int expected_dim, const char* who) {
    if (ctx.rows < 1) throw ValidationError(std::string(who) + ": empty context");
    if (ctx.cols != expected_dim)
        throw ShapeError(std::string(who) + ": context dim " + std::to_string(ctx.cols) +
                         " != expected " + std::to_string(expected_dim));
}

template <typename T>
void add_param(ParamList<T>& out, const std::string& name, Mat<T>& value, Mat<T>& grad) {
    out.push_back({name, &value.v, &grad.v});
}

}  // namespace

namespace detail {

template <typename T>
void softmax_rows(Mat<T>& m) {
    for (int r = 0; r < m.rows; ++r) {
        T* row = &m.v[static_cast<size_t>(r) * m.cols];
        T mx = row[0];
        for (int c = 1; c < m.cols; ++c) mx = std::max(mx, row[c]);
        T sum = T(0);
        for (int c = 0; c < m.cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < m.cols; ++c) row[c] /= sum;
    }
}

template <typename T>
Mat<T> softmax_backward(const Mat<T>& attn, const Mat<T>& dattn) {
    Mat<T> ds(attn.rows, attn.cols);
    for (int r = 0; r < attn.rows; ++r) {
        T dot = T(0);
        for (int c = 0; c < attn.cols; ++c) dot += attn.at(r, c) * dattn.at(r, c);
        for (int c = 0; c < attn.cols; ++c)
            ds.at(r, c) = attn.at(r, c) * (dattn.at(r, c) - dot);
    }
    return ds;
}

template <typename T>
Mat<T> head_slice(const Mat<T>& m, int head, int head_dim) {
    Mat<T> out(m.rows, head_dim);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < head_dim; ++c) out.at(r, c) = m.at(r, head * head_dim + c);
    return out;
}

template <typename T>
void head_insert(Mat<T>& dst, const Mat<T>& src, int head, int head_dim) {
    for (int r = 0; r < src.rows; ++r)
        for (int c = 0; c < head_dim; ++c) dst.at(r, head * head_dim + c) = src.at(r, c);
}

template void softmax_rows(Mat<float>&);
template void softmax_rows(Mat<double>&);
template Mat<float> softmax_backward(const Mat<float>&, const Mat<float>&);
template Mat<double> softmax_backward(const Mat<double>&, const Mat<double>&);
template Mat<float> head_slice(const Mat<float>&, int, int);
template Mat<double> head_slice(const Mat<double>&, int, int);
template void head_insert(Mat<float>&, const Mat<float>&, int, int);
template void head_insert(Mat<double>&, const Mat<double>&, int, int);

}  // namespace detail

using detail::head_insert;
using detail::head_slice;
using detail::softmax_backward;
using detail::softmax_rows;

// ---------------------------------------------------------------------------
// LambdaParams

template <typename T>
T LambdaParams<T>::value() const {
    if (q1.size() != k1.size() || q2.size() != k2.size() || q1.size() != q2.size())
        throw ShapeError("LambdaParams: vector length mismatch");
    double c1 = 0, c2 = 0;
    for (size_t i = 0; i < q1.size(); ++i) c1 += static_cast<double>(q1[i]) * k1[i];
    for (size_t i = 0; i < q2.size(); ++i) c2 += static_cast<double>(q2[i]) * k2[i];
    c1 = std::clamp(c1, -kClamp, kClamp);
    c2 = std::clamp(c2, -kClamp, kClamp);
    return static_cast<T>(std::exp(c1) - std::exp(c2) + static_cast<double>(init));
}

template <typename T>
void LambdaParams<T>::backward(T dlambda) {
    double c1 = 0, c2 = 0;
    for (size_t i = 0; i < q1.size(); ++i) c1 += static_cast<double>(q1[i]) * k1[i];
    for (size_t i = 0; i < q2.size(); ++i) c2 += static_cast<double>(q2[i]) * k2[i];
    // Clamped exponents contribute zero gradient.
    if (c1 > -kClamp && c1 < kClamp) {
        const T s = dlambda * static_cast<T>(std::exp(c1));
        for (size_t i = 0; i < q1.size(); ++i) {
            gq1[i] += s * k1[i];
            gk1[i] += s * q1[i];
        }
    }
    if (c2 > -kClamp && c2 < kClamp) {
        const T s = dlambda * static_cast<T>(std::exp(c2));
        for (size_t i = 0; i < q2.size(); ++i) {
            gq2[i] -= s * k2[i];
            gk2[i] -= s * q2[i];
        }
    }
}

template <typename T>
void LambdaParams<T>::collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".lambda_q1", &q1, &gq1});
    out.push_back({prefix + ".lambda_k1", &k1, &gk1});
    out.push_back({prefix + ".lambda_q2", &q2, &gq2});
    out.push_back({prefix + ".lambda_k2", &k2, &gk2});
}

// ---------------------------------------------------------------------------
// SelfAttention

template <typename T>
SelfAttention<T>::SelfAttention(int token_dim, int model_dim, int num_heads, RandomStream& rng,
                                bool zero_out_proj)
    : heads(num_heads) {
    if (model_dim % num_heads != 0)
        throw ShapeError("SelfAttention: model_dim " + std::to_string(model_dim) +
                         " not divisible by heads " + std::to_string(num_heads));
    wq = random_weight<T>(token_dim, model_dim, rng);
    wk = random_weight<T>(token_dim, model_dim, rng);
    wv = random_weight<T>(token_dim, model_dim, rng);
    wo = zero_out_proj ? Mat<T>(model_dim, token_dim) : random_weight<T>(model_dim, token_dim, rng);
    gwq = Mat<T>(token_dim, model_dim);
    gwk = Mat<T>(token_dim, model_dim);
    gwv = Mat<T>(token_dim, model_dim);
    gwo = Mat<T>(model_dim, token_dim);
}

template <typename T>
Mat<T> SelfAttention<T>::forward(const Mat<T>& tokens, Cache* cc) const {
    check_tokens(tokens, wq.rows, "self_attention");
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    Mat<T> q = matmul(tokens, wq);
    Mat<T> k = matmul(tokens, wk);
    Mat<T> v = matmul(tokens, wv);
    Mat<T> merged(tokens.rows, model_dim());
    std::vector<Mat<T>> attn(heads);
    for (int h = 0; h < heads; ++h) {
        Mat<T> qh = head_slice(q, h, d), kh = head_slice(k, h, d), vh = head_slice(v, h, d);
        Mat<T> scores = matmul_nt(qh, kh);
        for (auto& s : scores.v) s *= inv_sqrt_d;
        softmax_rows(scores);
        head_insert(merged, matmul(scores, vh), h, d);
        attn[h] = std::move(scores);
    }
    Mat<T> y = matmul(merged, wo);
    if (cc) {
        cc->x = tokens;
        cc->q = std::move(q);
        cc->k = std::move(k);
        cc->v = std::move(v);
        cc->merged = std::move(merged);
        cc->attn = std::move(attn);
    }
    return y;
}

template <typename T>
Mat<T> SelfAttention<T>::backward(const Mat<T>& dy, const Cache& cc) {
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    matmul_tn_acc(cc.merged, dy, gwo);
    Mat<T> dmerged = matmul_nt(dy, wo);

    Mat<T> dq(cc.q.rows, cc.q.cols), dk(cc.k.rows, cc.k.cols), dv(cc.v.rows, cc.v.cols);
    for (int h = 0; h < heads; ++h) {
        Mat<T> doh = head_slice(dmerged, h, d);
        Mat<T> vh = head_slice(cc.v, h, d);
        Mat<T> qh = head_slice(cc.q, h, d);
        Mat<T> kh = head_slice(cc.k, h, d);

        Mat<T> dattn = matmul_nt(doh, vh);
        Mat<T> dvh = matmul_tn(cc.attn[h], doh);
        Mat<T> ds = softmax_backward(cc.attn[h], dattn);
        for (auto& s : ds.v) s *= inv_sqrt_d;
        head_insert(dq, matmul(ds, kh), h, d);
        head_insert(dk, matmul_tn(ds, qh), h, d);
        head_insert(dv, dvh, h, d);
    }
    matmul_tn_acc(cc.x, dq, gwq);
    matmul_tn_acc(cc.x, dk, gwk);
    matmul_tn_acc(cc.x, dv, gwv);

    Mat<T> dx = matmul_nt(dq, wq);
    Mat<T> dk_contrib = matmul_nt(dk, wk);
    Mat<T> dv_contrib = matmul_nt(dv, wv);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dk_contrib.v[i] + dv_contrib.v[i];
    return dx;
}

template <typename T>
void SelfAttention<T>::collect(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wq", wq, gwq);
    add_param(out, prefix + ".wk", wk, gwk);
    add_param(out, prefix + ".wv", wv, gwv);
    add_param(out, prefix + ".wo", wo, gwo);
}

// ---------------------------------------------------------------------------
// DiffAttention

template <typename T>
DiffAttention<T>::DiffAttention(int token_dim, int model_dim, int num_heads, RandomStream& rng,
                                bool zero_out_proj)
    : heads(num_heads) {
    if (model_dim % num_heads != 0)
        throw ShapeError("DiffAttention: model_dim not divisible by heads");
    wq1 = random_weight<T>(token_dim, model_dim, rng);
    wk1 = random_weight<T>(token_dim, model_dim, rng);
    wq2 = random_weight<T>(token_dim, model_dim, rng);
    wk2 = random_weight<T>(token_dim, model_dim, rng);
    wv = random_weight<T>(token_dim, model_dim, rng);
    wo = zero_out_proj ? Mat<T>(model_dim, token_dim) : random_weight<T>(model_dim, token_dim, rng);
    gwq1 = Mat<T>(token_dim, model_dim);
    gwk1 = Mat<T>(token_dim, model_dim);
    gwq2 = Mat<T>(token_dim, model_dim);
    gwk2 = Mat<T>(token_dim, model_dim);
    gwv = Mat<T>(token_dim, model_dim);
    gwo = Mat<T>(model_dim, token_dim);
}

template <typename T>
Mat<T> DiffAttention<T>::forward(const Mat<T>& tokens, const LambdaParams<T>& lp,
                                 Cache* cc) const {
    check_tokens(tokens, wq1.rows, "diff_attention");
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const T lambda = lp.value();

    Mat<T> q1 = matmul(tokens, wq1), k1 = matmul(tokens, wk1);
    Mat<T> q2 = matmul(tokens, wq2), k2 = matmul(tokens, wk2);
    Mat<T> v = matmul(tokens, wv);
    Mat<T> merged(tokens.rows, model_dim());
    std::vector<Mat<T>> attn1(heads), attn2(heads);
    for (int h = 0; h < heads; ++h) {
        Mat<T> a1 = matmul_nt(head_slice(q1, h, d), head_slice(k1, h, d));
        Mat<T> a2 = matmul_nt(head_slice(q2, h, d), head_slice(k2, h, d));
        for (auto& s : a1.v) s *= inv_sqrt_d;
        for (auto& s : a2.v) s *= inv_sqrt_d;
        softmax_rows(a1);
        softmax_rows(a2);
        Mat<T> combined(a1.rows, a1.cols);
        for (size_t i = 0; i < combined.v.size(); ++i)
            combined.v[i] = a1.v[i] - lambda * a2.v[i];
        head_insert(merged, matmul(combined, head_slice(v, h, d)), h, d);
        attn1[h] = std::move(a1);
        attn2[h] = std::move(a2);
    }
    Mat<T> y = matmul(merged, wo);
    if (cc) {
        cc->x = tokens;
        cc->q1 = std::move(q1);
        cc->k1 = std::move(k1);
        cc->q2 = std::move(q2);
        cc->k2 = std::move(k2);
        cc->v = std::move(v);
        cc->merged = std::move(merged);
        cc->attn1 = std::move(attn1);
        cc->attn2 = std::move(attn2);
        cc->lambda = lambda;
    }
    return y;
}

template <typename T>
Mat<T> DiffAttention<T>::backward(const Mat<T>& dy, const Cache& cc, LambdaParams<T>& lp) {
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const T lambda = cc.lambda;

    matmul_tn_acc(cc.merged, dy, gwo);
    Mat<T> dmerged = matmul_nt(dy, wo);

    Mat<T> dq1(cc.q1.rows, cc.q1.cols), dk1(cc.k1.rows, cc.k1.cols);
    Mat<T> dq2(cc.q2.rows, cc.q2.cols), dk2(cc.k2.rows, cc.k2.cols);
    Mat<T> dv(cc.v.rows, cc.v.cols);
    T dlambda = T(0);
    for (int h = 0; h < heads; ++h) {
        Mat<T> doh = head_slice(dmerged, h, d);
        Mat<T> vh = head_slice(cc.v, h, d);
        const Mat<T>& a1 = cc.attn1[h];
        const Mat<T>& a2 = cc.attn2[h];

        Mat<T> combined(a1.rows, a1.cols);
        for (size_t i = 0; i < combined.v.size(); ++i)
            combined.v[i] = a1.v[i] - lambda * a2.v[i];
        head_insert(dv, matmul_tn(combined, doh), h, d);

        Mat<T> dcomb = matmul_nt(doh, vh);
        for (size_t i = 0; i < dcomb.v.size(); ++i) dlambda -= dcomb.v[i] * a2.v[i];

        Mat<T> ds1 = softmax_backward(a1, dcomb);
        Mat<T> dcomb2(dcomb.rows, dcomb.cols);
        for (size_t i = 0; i < dcomb.v.size(); ++i) dcomb2.v[i] = -lambda * dcomb.v[i];
        Mat<T> ds2 = softmax_backward(a2, dcomb2);
        for (auto& s : ds1.v) s *= inv_sqrt_d;
        for (auto& s : ds2.v) s *= inv_sqrt_d;

        head_insert(dq1, matmul(ds1, head_slice(cc.k1, h, d)), h, d);
        head_insert(dk1, matmul_tn(ds1, head_slice(cc.q1, h, d)), h, d);
        head_insert(dq2, matmul(ds2, head_slice(cc.k2, h, d)), h, d);
        head_insert(dk2, matmul_tn(ds2, head_slice(cc.q2, h, d)), h, d);
    }
    lp.backward(dlambda);

    matmul_tn_acc(cc.x, dq1, gwq1);
    matmul_tn_acc(cc.x, dk1, gwk1);
    matmul_tn_acc(cc.x, dq2, gwq2);
    matmul_tn_acc(cc.x, dk2, gwk2);
    matmul_tn_acc(cc.x, dv, gwv);

    Mat<T> dx = matmul_nt(dq1, wq1);
    for (auto [dm, wm] : {std::pair{&dk1, &wk1}, {&dq2, &wq2}, {&dk2, &wk2}, {&dv, &wv}}) {
        Mat<T> contrib = matmul_nt(*dm, *wm);
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += contrib.v[i];
    }
    return dx;
}

template <typename T>
void DiffAttention<T>::collect(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wq1", wq1, gwq1);
    add_param(out, prefix + ".wk1", wk1, gwk1);
    add_param(out, prefix + ".wq2", wq2, gwq2);
    add_param(out, prefix + ".wk2", wk2, gwk2);
    add_param(out, prefix + ".wv", wv, gwv);
    add_param(out, prefix + ".wo", wo, gwo);
}

// ---------------------------------------------------------------------------
// CrossAttention

template <typename T>
CrossAttention<T>::CrossAttention(int token_dim, int ctx_dim, int model_dim, int num_heads,
                                  RandomStream& rng, bool zero_out_proj)
    : heads(num_heads) {
    if (model_dim % num_heads != 0)
        throw ShapeError("CrossAttention: model_dim not divisible by heads");
    wq = random_weight<T>(token_dim, model_dim, rng);
    wk = random_weight<T>(ctx_dim, model_dim, rng);
    wv = random_weight<T>(ctx_dim, model_dim, rng);
    wo = zero_out_proj ? Mat<T>(model_dim, token_dim) : random_weight<T>(model_dim, token_dim, rng);
    gwq = Mat<T>(token_dim, model_dim);
    gwk = Mat<T>(ctx_dim, model_dim);
    gwv = Mat<T>(ctx_dim, model_dim);
    gwo = Mat<T>(model_dim, token_dim);
}

template <typename T>
Mat<T> CrossAttention<T>::forward(const Mat<T>& tokens, const Mat<T>& context, Cache* cc) const {
    check_tokens(tokens, wq.rows, "cross_attention");
    check_context(context, wk.rows, "cross_attention");
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    Mat<T> q = matmul(tokens, wq);
    Mat<T> k = matmul(context, wk);
    Mat<T> v = matmul(context, wv);
    Mat<T> merged(tokens.rows, model_dim());
    std::vector<Mat<T>> attn(heads);
    for (int h = 0; h < heads; ++h) {
        Mat<T> scores = matmul_nt(head_slice(q, h, d), head_slice(k, h, d));
        for (auto& s : scores.v) s *= inv_sqrt_d;
        softmax_rows(scores);
        head_insert(merged, matmul(scores, head_slice(v, h, d)), h, d);
        attn[h] = std::move(scores);
    }
    Mat<T> y = matmul(merged, wo);
    if (cc) {
        cc->x = tokens;
        cc->ctx = context;
        cc->q = std::move(q);
        cc->k = std::move(k);
        cc->v = std::move(v);
        cc->merged = std::move(merged);
        cc->attn = std::move(attn);
    }
    return y;
}

template <typename T>
Mat<T> CrossAttention<T>::backward(const Mat<T>& dy, const Cache& cc) {
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    matmul_tn_acc(cc.merged, dy, gwo);
    Mat<T> dmerged = matmul_nt(dy, wo);

    Mat<T> dq(cc.q.rows, cc.q.cols), dk(cc.k.rows, cc.k.cols), dv(cc.v.rows, cc.v.cols);
    for (int h = 0; h < heads; ++h) {
        Mat<T> doh = head_slice(dmerged, h, d);
        Mat<T> dattn = matmul_nt(doh, head_slice(cc.v, h, d));
        head_insert(dv, matmul_tn(cc.attn[h], doh), h, d);
        Mat<T> ds = softmax_backward(cc.attn[h], dattn);
        for (auto& s : ds.v) s *= inv_sqrt_d;
        head_insert(dq, matmul(ds, head_slice(cc.k, h, d)), h, d);
        head_insert(dk, matmul_tn(ds, head_slice(cc.q, h, d)), h, d);
    }
    matmul_tn_acc(cc.x, dq, gwq);
    // Context rows are inputs, not parameters; only the projections learn.
    matmul_tn_acc(cc.ctx, dk, gwk);
    matmul_tn_acc(cc.ctx, dv, gwv);
    return matmul_nt(dq, wq);
}

template <typename T>
void CrossAttention<T>::collect(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wq", wq, gwq);
    add_param(out, prefix + ".wk", wk, gwk);
    add_param(out, prefix + ".wv", wv, gwv);
    add_param(out, prefix + ".wo", wo, gwo);
}

// ---------------------------------------------------------------------------
// DiffCrossAttention

template <typename T>
DiffCrossAttention<T>::DiffCrossAttention(int token_dim, int ctx_dim, int model_dim, int num_heads,
                                          RandomStream& rng, bool zero_out_proj)
    : heads(num_heads) {
    if (model_dim % num_heads != 0)
        throw ShapeError("DiffCrossAttention: model_dim not divisible by heads");
    wq1 = random_weight<T>(token_dim, model_dim, rng);
    wq2 = random_weight<T>(token_dim, model_dim, rng);
    wk1 = random_weight<T>(ctx_dim, model_dim, rng);
    wk2 = random_weight<T>(ctx_dim, model_dim, rng);
    wv = random_weight<T>(ctx_dim, model_dim, rng);
    wo = zero_out_proj ? Mat<T>(model_dim, token_dim) : random_weight<T>(model_dim, token_dim, rng);
    gwq1 = Mat<T>(token_dim, model_dim);
    gwq2 = Mat<T>(token_dim, model_dim);
    gwk1 = Mat<T>(ctx_dim, model_dim);
    gwk2 = Mat<T>(ctx_dim, model_dim);
    gwv = Mat<T>(ctx_dim, model_dim);
    gwo = Mat<T>(model_dim, token_dim);
}

template <typename T>
Mat<T> DiffCrossAttention<T>::forward(const Mat<T>& tokens, const Mat<T>& context,
                                      const LambdaParams<T>& lp, Cache* cc) const {
    check_tokens(tokens, wq1.rows, "diff_cross_attention");
    check_context(context, wk1.rows, "diff_cross_attention");
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const T lambda = lp.value();

    Mat<T> q1 = matmul(tokens, wq1), q2 = matmul(tokens, wq2);
    Mat<T> k1 = matmul(context, wk1), k2 = matmul(context, wk2);
    Mat<T> v = matmul(context, wv);
    Mat<T> merged(tokens.rows, model_dim());
    std::vector<Mat<T>> attn1(heads), attn2(heads);
    for (int h = 0; h < heads; ++h) {
        Mat<T> a1 = matmul_nt(head_slice(q1, h, d), head_slice(k1, h, d));
        Mat<T> a2 = matmul_nt(head_slice(q2, h, d), head_slice(k2, h, d));
        for (auto& s : a1.v) s *= inv_sqrt_d;
        for (auto& s : a2.v) s *= inv_sqrt_d;
        softmax_rows(a1);
        softmax_rows(a2);
        Mat<T> combined(a1.rows, a1.cols);
        for (size_t i = 0; i < combined.v.size(); ++i)
            combined.v[i] = a1.v[i] - lambda * a2.v[i];
        head_insert(merged, matmul(combined, head_slice(v, h, d)), h, d);
        attn1[h] = std::move(a1);
        attn2[h] = std::move(a2);
    }
    Mat<T> y = matmul(merged, wo);
    if (cc) {
        cc->x = tokens;
        cc->ctx = context;
        cc->q1 = std::move(q1);
        cc->q2 = std::move(q2);
        cc->k1 = std::move(k1);
        cc->k2 = std::move(k2);
        cc->v = std::move(v);
        cc->merged = std::move(merged);
        cc->attn1 = std::move(attn1);
        cc->attn2 = std::move(attn2);
        cc->lambda = lambda;
    }
    return y;
}

template <typename T>
Mat<T> DiffCrossAttention<T>::backward(const Mat<T>& dy, const Cache& cc, LambdaParams<T>& lp) {
    const int d = head_dim();
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const T lambda = cc.lambda;

    matmul_tn_acc(cc.merged, dy, gwo);
    Mat<T> dmerged = matmul_nt(dy, wo);

    Mat<T> dq1(cc.q1.rows, cc.q1.cols), dq2(cc.q2.rows, cc.q2.cols);
    Mat<T> dk1(cc.k1.rows, cc.k1.cols), dk2(cc.k2.rows, cc.k2.cols);
    Mat<T> dv(cc.v.rows, cc.v.cols);
    T dlambda = T(0);
    for (int h = 0; h < heads; ++h) {
        Mat<T> doh = head_slice(dmerged, h, d);
        Mat<T> vh = head_slice(cc.v, h, d);
        const Mat<T>& a1 = cc.attn1[h];
        const Mat<T>& a2 = cc.attn2[h];

        Mat<T> combined(a1.rows, a1.cols);
        for (size_t i = 0; i < combined.v.size(); ++i)
            combined.v[i] = a1.v[i] - lambda * a2.v[i];
        head_insert(dv, matmul_tn(combined, doh), h, d);

        Mat<T> dcomb = matmul_nt(doh, vh);
        for (size_t i = 0; i < dcomb.v.size(); ++i) dlambda -= dcomb.v[i] * a2.v[i];

        Mat<T> ds1 = softmax_backward(a1, dcomb);
        Mat<T> dcomb2(dcomb.rows, dcomb.cols);
        for (size_t i = 0; i < dcomb.v.size(); ++i) dcomb2.v[i] = -lambda * dcomb.v[i];
        Mat<T> ds2 = softmax_backward(a2, dcomb2);
        for (auto& s : ds1.v) s *= inv_sqrt_d;
        for (auto& s : ds2.v) s *= inv_sqrt_d;

        head_insert(dq1, matmul(ds1, head_slice(cc.k1, h, d)), h, d);
        head_insert(dk1, matmul_tn(ds1, head_slice(cc.q1, h, d)), h, d);
        head_insert(dq2, matmul(ds2, head_slice(cc.k2, h, d)), h, d);
        head_insert(dk2, matmul_tn(ds2, head_slice(cc.q2, h, d)), h, d);
    }
    lp.backward(dlambda);

    matmul_tn_acc(cc.x, dq1, gwq1);
    matmul_tn_acc(cc.x, dq2, gwq2);
    matmul_tn_acc(cc.ctx, dk1, gwk1);
    matmul_tn_acc(cc.ctx, dk2, gwk2);
    matmul_tn_acc(cc.ctx, dv, gwv);

    Mat<T> dx = matmul_nt(dq1, wq1);
    Mat<T> contrib = matmul_nt(dq2, wq2);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += contrib.v[i];
    return dx;
}

template <typename T>
void DiffCrossAttention<T>::collect(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wq1", wq1, gwq1);
    add_param(out, prefix + ".wq2", wq2, gwq2);
    add_param(out, prefix + ".wk1", wk1, gwk1);
    add_param(out, prefix + ".wk2", wk2, gwk2);
    add_param(out, prefix + ".wv", wv, gwv);
    add_param(out, prefix + ".wo", wo, gwo);
}

template struct LambdaParams<float>;
template struct LambdaParams<double>;
template struct SelfAttention<float>;
template struct SelfAttention<double>;
template struct DiffAttention<float>;
template struct DiffAttention<double>;
template struct CrossAttention<float>;
template struct CrossAttention<double>;
template struct DiffCrossAttention<float>;
template struct DiffCrossAttention<double>;

}  // namespace dfbk
