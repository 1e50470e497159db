#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "leafid/common.hpp"

// Minimal CNN stack for the twin embedding networks: N blocks of
// [3x3 conv -> ReLU -> 2x2 max pool], then a dense projection with a
// sigmoid to the embedding space. Templated on the scalar so the same
// arithmetic can be instantiated in double for finite-difference checks.
namespace leafid::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct BackboneConfig {
    std::string id;
    int in_h = 0, in_w = 0;
    std::vector<int> channels;   // output channels per block
    int first_stride = 1;        // stride of the first conv
    int embed_dim = 0;           // M
    int frozen_blocks = 0;       // leading blocks excluded from updates

    struct BlockShape {
        int in_c, in_h, in_w;    // conv input
        int out_c;               // conv output channels
        int conv_h, conv_w;      // conv output (pre-pool)
        int out_h, out_w;        // post-pool
    };
    std::vector<BlockShape> block_shapes() const;
    int flat_dim() const;
    void validate() const;
};

// Known backbone presets. "small4" is the trainable default; "tiny2" is a
// two-block toy used by tests and gradient checks.
BackboneConfig backbone_config(const std::string& id, int in_h, int in_w);
bool is_known_backbone(const std::string& id);

template <class S>
struct BackboneParams {
    std::vector<Mat<S>> conv_w;  // [out_c, in_c*9]
    std::vector<Vec<S>> conv_b;
    Mat<S> dense_w;              // [M, flat_dim]
    Vec<S> dense_b;

    template <class T>
    BackboneParams<T> cast() const {
        BackboneParams<T> out;
        out.conv_w.reserve(conv_w.size());
        out.conv_b.reserve(conv_b.size());
        for (const auto& w : conv_w) out.conv_w.push_back(w.template cast<T>());
        for (const auto& b : conv_b) out.conv_b.push_back(b.template cast<T>());
        out.dense_w = dense_w.template cast<T>();
        out.dense_b = dense_b.template cast<T>();
        return out;
    }
};

// Visits every parameter buffer with (ptr, count, block) where block is the
// conv block index or -1 for the dense projection.
template <class S, class F>
void visit_params(BackboneParams<S>& p, F&& f) {
    for (std::size_t i = 0; i < p.conv_w.size(); ++i) {
        f(p.conv_w[i].data(), static_cast<std::size_t>(p.conv_w[i].size()), static_cast<int>(i));
        f(p.conv_b[i].data(), static_cast<std::size_t>(p.conv_b[i].size()), static_cast<int>(i));
    }
    f(p.dense_w.data(), static_cast<std::size_t>(p.dense_w.size()), -1);
    f(p.dense_b.data(), static_cast<std::size_t>(p.dense_b.size()), -1);
}

template <class S, class F>
void visit_params(const BackboneParams<S>& p, F&& f) {
    visit_params(const_cast<BackboneParams<S>&>(p), [&](S* d, std::size_t n, int blk) {
        f(static_cast<const S*>(d), n, blk);
    });
}

template <class S>
std::size_t param_count(const BackboneParams<S>& p) {
    std::size_t n = 0;
    visit_params(p, [&](const S*, std::size_t c, int) { n += c; });
    return n;
}

// Per-forward storage so a shared parameter set can drive both twins (and
// several worker threads) at once.
template <class S>
struct Workspace {
    std::vector<Mat<S>> cols;       // im2col buffer per block
    std::vector<Mat<S>> conv_out;   // post-ReLU conv output per block
    std::vector<Mat<S>> pool_out;   // post-pool output per block
    std::vector<Eigen::ArrayXXi> pool_argmax;
    Vec<S> dense_pre;
    Vec<S> embed;
};

template <class S>
struct Gradients {
    BackboneParams<S> g;

    void init_like(const BackboneParams<S>& p) {
        g.conv_w.resize(p.conv_w.size());
        g.conv_b.resize(p.conv_b.size());
        for (std::size_t i = 0; i < p.conv_w.size(); ++i) {
            g.conv_w[i] = Mat<S>::Zero(p.conv_w[i].rows(), p.conv_w[i].cols());
            g.conv_b[i] = Vec<S>::Zero(p.conv_b[i].size());
        }
        g.dense_w = Mat<S>::Zero(p.dense_w.rows(), p.dense_w.cols());
        g.dense_b = Vec<S>::Zero(p.dense_b.size());
    }
    void set_zero() {
        for (auto& w : g.conv_w) w.setZero();
        for (auto& b : g.conv_b) b.setZero();
        g.dense_w.setZero();
        g.dense_b.setZero();
    }
    void add(const Gradients<S>& o) {
        for (std::size_t i = 0; i < g.conv_w.size(); ++i) {
            g.conv_w[i] += o.g.conv_w[i];
            g.conv_b[i] += o.g.conv_b[i];
        }
        g.dense_w += o.g.dense_w;
        g.dense_b += o.g.dense_b;
    }
    void scale(S s) {
        for (auto& w : g.conv_w) w *= s;
        for (auto& b : g.conv_b) b *= s;
        g.dense_w *= s;
        g.dense_b *= s;
    }
};

// --- im2col / col2im for 3x3 kernels with padding 1 -----------------------

template <class S>
void im2col_3x3(const Mat<S>& fmap, int h, int w, int stride, Mat<S>& cols) {
    const int c_in = static_cast<int>(fmap.rows());
    const int oh = (h - 1) / stride + 1;
    const int ow = (w - 1) / stride + 1;
    cols.resize(static_cast<Eigen::Index>(c_in) * 9, static_cast<Eigen::Index>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int col = oy * ow + ox;
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = oy * stride + ky - 1;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * stride + kx - 1;
                    const int row_base = (ky * 3 + kx) * c_in;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        cols.block(row_base, col, c_in, 1).setZero();
                    } else {
                        cols.block(row_base, col, c_in, 1) = fmap.col(iy * w + ix);
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_3x3(const Mat<S>& dcols, int h, int w, int stride, Mat<S>& dfmap) {
    const int c_in = static_cast<int>(dcols.rows()) / 9;
    const int oh = (h - 1) / stride + 1;
    const int ow = (w - 1) / stride + 1;
    dfmap.setZero(c_in, static_cast<Eigen::Index>(h) * w);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int col = oy * ow + ox;
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = oy * stride + ky - 1;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * stride + kx - 1;
                    if (ix < 0 || ix >= w) continue;
                    dfmap.col(iy * w + ix) += dcols.block((ky * 3 + kx) * c_in, col, c_in, 1);
                }
            }
        }
    }
}

// --- forward / backward ----------------------------------------------------

// `input` is [3, in_h*in_w], already normalized. Returns the embedding held
// in ws.embed.
template <class S>
const Vec<S>& backbone_forward(const BackboneConfig& cfg, const BackboneParams<S>& p,
                               const Mat<S>& input, Workspace<S>& ws) {
    const auto shapes = cfg.block_shapes();
    const std::size_t nb = shapes.size();
    ws.cols.resize(nb);
    ws.conv_out.resize(nb);
    ws.pool_out.resize(nb);
    ws.pool_argmax.resize(nb);

    const Mat<S>* cur = &input;
    for (std::size_t i = 0; i < nb; ++i) {
        const auto& sh = shapes[i];
        const int stride = (i == 0) ? cfg.first_stride : 1;
        im2col_3x3(*cur, sh.in_h, sh.in_w, stride, ws.cols[i]);
        ws.conv_out[i].noalias() = p.conv_w[i] * ws.cols[i];
        ws.conv_out[i].colwise() += p.conv_b[i];
        ws.conv_out[i] = ws.conv_out[i].cwiseMax(S(0));  // ReLU

        // 2x2 max pool, stride 2
        const int oc = sh.out_c;
        const int ph = sh.out_h, pw = sh.out_w;
        ws.pool_out[i].resize(oc, static_cast<Eigen::Index>(ph) * pw);
        ws.pool_argmax[i].resize(oc, static_cast<Eigen::Index>(ph) * pw);
        for (int py = 0; py < ph; ++py) {
            for (int px = 0; px < pw; ++px) {
                const int out_col = py * pw + px;
                const int c00 = (2 * py) * sh.conv_w + 2 * px;
                const int c01 = c00 + 1;
                const int c10 = c00 + sh.conv_w;
                const int c11 = c10 + 1;
                for (int ch = 0; ch < oc; ++ch) {
                    S best = ws.conv_out[i](ch, c00);
                    int arg = c00;
                    if (ws.conv_out[i](ch, c01) > best) { best = ws.conv_out[i](ch, c01); arg = c01; }
                    if (ws.conv_out[i](ch, c10) > best) { best = ws.conv_out[i](ch, c10); arg = c10; }
                    if (ws.conv_out[i](ch, c11) > best) { best = ws.conv_out[i](ch, c11); arg = c11; }
                    ws.pool_out[i](ch, out_col) = best;
                    ws.pool_argmax[i](ch, out_col) = arg;
                }
            }
        }
        cur = &ws.pool_out[i];
    }

    Eigen::Map<const Vec<S>> flat(cur->data(), cur->size());
    ws.dense_pre.noalias() = p.dense_w * flat;
    ws.dense_pre += p.dense_b;
    ws.embed = ws.dense_pre.unaryExpr([](S x) { return S(1) / (S(1) + std::exp(-x)); });
    return ws.embed;
}

// Backpropagates d(loss)/d(embedding) through the workspace of a previous
// forward call, accumulating parameter gradients. The input gradient is not
// produced (never needed for pair training).
template <class S>
void backbone_backward(const BackboneConfig& cfg, const BackboneParams<S>& p, const Mat<S>& input,
                       const Workspace<S>& ws, const Vec<S>& d_embed, Gradients<S>& grads) {
    const auto shapes = cfg.block_shapes();
    const std::size_t nb = shapes.size();

    Vec<S> d_pre = d_embed.array() * ws.embed.array() * (S(1) - ws.embed.array());
    const Mat<S>& last = ws.pool_out[nb - 1];
    Eigen::Map<const Vec<S>> flat(last.data(), last.size());
    grads.g.dense_w.noalias() += d_pre * flat.transpose();
    grads.g.dense_b += d_pre;

    Vec<S> d_flat = p.dense_w.transpose() * d_pre;
    Mat<S> d_pool = Eigen::Map<const Mat<S>>(d_flat.data(), last.rows(), last.cols());

    Mat<S> d_conv, d_cols, d_prev;
    for (std::size_t ii = nb; ii-- > 0;) {
        const auto& sh = shapes[ii];
        const int oc = sh.out_c;
        const int stride = (ii == 0) ? cfg.first_stride : 1;

        // unpool then ReLU gate
        d_conv.setZero(oc, static_cast<Eigen::Index>(sh.conv_h) * sh.conv_w);
        for (int ch = 0; ch < oc; ++ch)
            for (Eigen::Index col = 0; col < d_pool.cols(); ++col)
                d_conv(ch, ws.pool_argmax[ii](ch, col)) += d_pool(ch, col);
        d_conv = (ws.conv_out[ii].array() > S(0)).select(d_conv, Mat<S>::Zero(d_conv.rows(), d_conv.cols()));

        grads.g.conv_w[ii].noalias() += d_conv * ws.cols[ii].transpose();
        grads.g.conv_b[ii] += d_conv.rowwise().sum();

        if (ii > 0) {
            d_cols.noalias() = p.conv_w[ii].transpose() * d_conv;
            col2im_3x3(d_cols, sh.in_h, sh.in_w, stride, d_prev);
            d_pool = d_prev;
        }
    }
}

// Glorot-uniform initialization, deterministic per seed.
template <class S>
void init_params(const BackboneConfig& cfg, BackboneParams<S>& p, std::uint64_t seed) {
    const auto shapes = cfg.block_shapes();
    auto rng = make_rng(seed);
    auto fill_uniform = [&](Mat<S>& m, double limit) {
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
    };

    p.conv_w.resize(shapes.size());
    p.conv_b.resize(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const int fan_in = shapes[i].in_c * 9;
        const int fan_out = cfg.channels[i] * 9;
        p.conv_w[i].resize(cfg.channels[i], shapes[i].in_c * 9);
        fill_uniform(p.conv_w[i], std::sqrt(6.0 / (fan_in + fan_out)));
        p.conv_b[i] = Vec<S>::Zero(cfg.channels[i]);
    }
    const int flat = cfg.flat_dim();
    p.dense_w.resize(cfg.embed_dim, flat);
    fill_uniform(p.dense_w, std::sqrt(6.0 / (flat + cfg.embed_dim)));
    p.dense_b = Vec<S>::Zero(cfg.embed_dim);
}

}  // namespace leafid::nn
