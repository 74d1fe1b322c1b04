#pragma once

#include "dfbk/attention.hpp"
#include "dfbk/common.hpp"
#include "dfbk/wavelet.hpp"

namespace dfbk {

// A feature map in [y][x][c] layout is already a (h*w) x c token matrix;
// these just relabel the storage.
template <typename T>
Mat<T> grid_to_tokens(const Grid<T>& g) {
    Mat<T> m(g.h * g.w, g.c);
    m.v = g.v;
    return m;
}

template <typename T>
Grid<T> tokens_to_grid(const Mat<T>& m, int h, int w) {
    if (m.rows != h * w) throw ShapeError("tokens_to_grid: row count != h*w");
    Grid<T> g(h, w, m.cols);
    g.v = m.v;
    return g;
}

// Frequency-rebalancing block: decomposes a feature map into wavelet bands,
// self-attends the low band, applies differential attention to the stacked
// detail bands, recombines with the inverse transform, and adds the input
// back as a residual. Output projections start at zero so a fresh block is
// an exact identity.
template <typename T>
struct DfbBlock {
    int channels = 0;
    SelfAttention<T> low_attn;
    DiffAttention<T> high_attn;
    LambdaParams<T> lambda;

    struct Cache {
        std::vector<typename SelfAttention<T>::Cache> low;
        std::vector<typename DiffAttention<T>::Cache> high;
    };

    DfbBlock() = default;
    DfbBlock(int channels_, int low_model_dim, int high_model_dim, int heads, T lambda_init,
             RandomStream& rng);

    Grid<T> forward_single(const Grid<T>& z, typename SelfAttention<T>::Cache* low_cc,
                           typename DiffAttention<T>::Cache* high_cc) const;
    Grid<T> backward_single(const Grid<T>& dy, const typename SelfAttention<T>::Cache& low_cc,
                            const typename DiffAttention<T>::Cache& high_cc);

    Batch<T> forward(const Batch<T>& z, Cache* cc) const;
    Batch<T> backward(const Batch<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

// Knowledge-fusion block: cross-attends the low band onto an external
// context sequence and the stacked detail bands through differential cross
// attention, recombines, and adds the residual.
template <typename T>
struct KgBlock {
    int channels = 0;
    CrossAttention<T> low_cross;
    DiffCrossAttention<T> high_cross;
    LambdaParams<T> lambda;

    struct Cache {
        std::vector<typename CrossAttention<T>::Cache> low;
        std::vector<typename DiffCrossAttention<T>::Cache> high;
    };

    KgBlock() = default;
    KgBlock(int channels_, int ctx_dim, int low_model_dim, int high_model_dim, int heads,
            T lambda_init, RandomStream& rng);

    Grid<T> forward_single(const Grid<T>& z, const Mat<T>& context,
                           typename CrossAttention<T>::Cache* low_cc,
                           typename DiffCrossAttention<T>::Cache* high_cc) const;
    Grid<T> backward_single(const Grid<T>& dy, const typename CrossAttention<T>::Cache& low_cc,
                            const typename DiffCrossAttention<T>::Cache& high_cc);

    Batch<T> forward(const Batch<T>& z, const std::vector<Mat<T>>& contexts, Cache* cc) const;
    Batch<T> backward(const Batch<T>& dy, const Cache& cc);
    void collect(const std::string& prefix, ParamList<T>& out);
};

template <typename T>
Grid<T> dfb_forward(const Grid<T>& z, const DfbBlock<T>& block) {
    return block.forward_single(z, nullptr, nullptr);
}

template <typename T>
Grid<T> kg_forward(const Grid<T>& z, const Mat<T>& context, const KgBlock<T>& block) {
    return block.forward_single(z, context, nullptr, nullptr);
}

// Branch dispatch mirroring the block application switch: the frequency
// branch feeds z_s, the knowledge branch feeds z_k, and a disabled branch
// passes the input through untouched.
template <typename T>
std::pair<Grid<T>, Grid<T>> dfbk_dispatch(const Grid<T>& z, const Mat<T>& context, bool use_dfb,
                                          bool use_kg, const DfbBlock<T>& dfb,
                                          const KgBlock<T>& kg) {
    Grid<T> zs = use_dfb ? dfb_forward(z, dfb) : z;
    Grid<T> zk = use_kg ? kg_forward(z, context, kg) : z;
    return {std::move(zs), std::move(zk)};
}

extern template struct DfbBlock<float>;
extern template struct DfbBlock<double>;
extern template struct KgBlock<float>;
extern template struct KgBlock<double>;

}  // namespace dfbk
