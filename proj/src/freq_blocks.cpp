#include "dfbk/freq_blocks.hpp"

namespace dfbk {

// ---------------------------------------------------------------------------
// DfbBlock

template <typename T>
DfbBlock<T>::DfbBlock(int channels_, int low_model_dim, int high_model_dim, int heads,
                      T lambda_init, RandomStream& rng)
    : channels(channels_),
      low_attn(channels_, low_model_dim, heads, rng, /*zero_out_proj=*/true),
      high_attn(3 * channels_, high_model_dim, heads, rng, /*zero_out_proj=*/true),
      lambda(high_model_dim / heads, lambda_init, rng) {}

template <typename T>
Grid<T> DfbBlock<T>::forward_single(const Grid<T>& z, typename SelfAttention<T>::Cache* low_cc,
                                    typename DiffAttention<T>::Cache* high_cc) const {
    if (z.c != channels)
        throw ShapeError("DfbBlock: expected " + std::to_string(channels) + " channels, got " +
                         std::to_string(z.c));
    BandsT<T> bands = dwt(z);
    const int bh = bands.ll.h, bw = bands.ll.w;

    Mat<T> low_out = low_attn.forward(grid_to_tokens(bands.ll), low_cc);
    Mat<T> high_out = high_attn.forward(grid_to_tokens(concat_high(bands)), lambda, high_cc);

    BandsT<T> out_bands;
    out_bands.ll = tokens_to_grid(low_out, bh, bw);
    split_high(tokens_to_grid(high_out, bh, bw), out_bands.lh, out_bands.hl, out_bands.hh);

    Grid<T> out = iwt(out_bands);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += z.v[i];
    return out;
}

template <typename T>
Grid<T> DfbBlock<T>::backward_single(const Grid<T>& dy,
                                     const typename SelfAttention<T>::Cache& low_cc,
                                     const typename DiffAttention<T>::Cache& high_cc) {
    // iwt is orthonormal, so its transpose is the forward transform.
    BandsT<T> dbands = dwt(dy);
    const int bh = dbands.ll.h, bw = dbands.ll.w;

    Mat<T> dlow = low_attn.backward(grid_to_tokens(dbands.ll), low_cc);
    Mat<T> dhigh = high_attn.backward(grid_to_tokens(concat_high(dbands)), high_cc, lambda);

    BandsT<T> din;
    din.ll = tokens_to_grid(dlow, bh, bw);
    split_high(tokens_to_grid(dhigh, bh, bw), din.lh, din.hl, din.hh);

    Grid<T> dx = iwt(din);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];  // residual path
    return dx;
}

template <typename T>
Batch<T> DfbBlock<T>::forward(const Batch<T>& z, Cache* cc) const {
    Batch<T> out(z.n, z.h, z.w, z.c);
    if (cc) {
        cc->low.resize(z.n);
        cc->high.resize(z.n);
    }
    for (int i = 0; i < z.n; ++i) {
        Grid<T> oi = forward_single(z.sample(i), cc ? &cc->low[i] : nullptr,
                                    cc ? &cc->high[i] : nullptr);
        out.set_sample(i, oi);
    }
    return out;
}

template <typename T>
Batch<T> DfbBlock<T>::backward(const Batch<T>& dy, const Cache& cc) {
    Batch<T> dx(dy.n, dy.h, dy.w, dy.c);
    for (int i = 0; i < dy.n; ++i)
        dx.set_sample(i, backward_single(dy.sample(i), cc.low[i], cc.high[i]));
    return dx;
}

template <typename T>
void DfbBlock<T>::collect(const std::string& prefix, ParamList<T>& out) {
    low_attn.collect(prefix + ".low", out);
    high_attn.collect(prefix + ".high", out);
    lambda.collect(prefix + ".high", out);
}

// ---------------------------------------------------------------------------
// KgBlock

template <typename T>
KgBlock<T>::KgBlock(int channels_, int ctx_dim, int low_model_dim, int high_model_dim, int heads,
                    T lambda_init, RandomStream& rng)
    : channels(channels_),
      low_cross(channels_, ctx_dim, low_model_dim, heads, rng, /*zero_out_proj=*/true),
      high_cross(3 * channels_, ctx_dim, high_model_dim, heads, rng, /*zero_out_proj=*/true),
      lambda(high_model_dim / heads, lambda_init, rng) {}

template <typename T>
Grid<T> KgBlock<T>::forward_single(const Grid<T>& z, const Mat<T>& context,
                                   typename CrossAttention<T>::Cache* low_cc,
                                   typename DiffCrossAttention<T>::Cache* high_cc) const {
    if (z.c != channels)
        throw ShapeError("KgBlock: expected " + std::to_string(channels) + " channels, got " +
                         std::to_string(z.c));
    BandsT<T> bands = dwt(z);
    const int bh = bands.ll.h, bw = bands.ll.w;

    Mat<T> low_out = low_cross.forward(grid_to_tokens(bands.ll), context, low_cc);
    Mat<T> high_out =
        high_cross.forward(grid_to_tokens(concat_high(bands)), context, lambda, high_cc);

    BandsT<T> out_bands;
    out_bands.ll = tokens_to_grid(low_out, bh, bw);
    split_high(tokens_to_grid(high_out, bh, bw), out_bands.lh, out_bands.hl, out_bands.hh);

    Grid<T> out = iwt(out_bands);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += z.v[i];
    return out;
}

template <typename T>
Grid<T> KgBlock<T>::backward_single(const Grid<T>& dy,
                                    const typename CrossAttention<T>::Cache& low_cc,
                                    const typename DiffCrossAttention<T>::Cache& high_cc) {
    BandsT<T> dbands = dwt(dy);
    const int bh = dbands.ll.h, bw = dbands.ll.w;

    Mat<T> dlow = low_cross.backward(grid_to_tokens(dbands.ll), low_cc);
    Mat<T> dhigh = high_cross.backward(grid_to_tokens(concat_high(dbands)), high_cc, lambda);

    BandsT<T> din;
    din.ll = tokens_to_grid(dlow, bh, bw);
    split_high(tokens_to_grid(dhigh, bh, bw), din.lh, din.hl, din.hh);

    Grid<T> dx = iwt(din);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
    return dx;
}

template <typename T>
Batch<T> KgBlock<T>::forward(const Batch<T>& z, const std::vector<Mat<T>>& contexts,
                             Cache* cc) const {
    if (static_cast<int>(contexts.size()) != z.n)
        throw ShapeError("KgBlock: context count != batch size");
    Batch<T> out(z.n, z.h, z.w, z.c);
    if (cc) {
        cc->low.resize(z.n);
        cc->high.resize(z.n);
    }
    for (int i = 0; i < z.n; ++i) {
        Grid<T> oi = forward_single(z.sample(i), contexts[i], cc ? &cc->low[i] : nullptr,
                                    cc ? &cc->high[i] : nullptr);
        out.set_sample(i, oi);
    }
    return out;
}

template <typename T>
Batch<T> KgBlock<T>::backward(const Batch<T>& dy, const Cache& cc) {
    Batch<T> dx(dy.n, dy.h, dy.w, dy.c);
    for (int i = 0; i < dy.n; ++i)
        dx.set_sample(i, backward_single(dy.sample(i), cc.low[i], cc.high[i]));
    return dx;
}

template <typename T>
void KgBlock<T>::collect(const std::string& prefix, ParamList<T>& out) {
    low_cross.collect(prefix + ".low", out);
    high_cross.collect(prefix + ".high", out);
    lambda.collect(prefix + ".high", out);
}

template struct DfbBlock<float>;
template struct DfbBlock<double>;
template struct KgBlock<float>;
template struct KgBlock<double>;

}  // namespace dfbk
