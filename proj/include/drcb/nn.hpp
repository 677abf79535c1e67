#pragma once

#include <cblas.h>

#include "drcb/tensor.hpp"

extern "C" void openblas_set_num_threads(int);

namespace drcb {

// BLAS thread count. Default 1: single-threaded GEMM keeps every reduction
// order fixed, which the bitwise-reproducibility contracts rely on.
inline void set_compute_threads(int n) { openblas_set_num_threads(n > 0 ? n : 1); }

namespace detail {

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// col is (Cin*kh*kw, OH*OW) row-major for one sample.
inline void im2col(const double* x, int cin, int h, int w, int kh, int kw, int stride, int pad,
                   int oh, int ow, double* col) {
    for (int c = 0; c < cin; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                double* row = col + (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                                        (static_cast<std::size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride + i - pad;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + j - pad;
                        row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? x[(static_cast<std::size_t>(c) * h + iy) * w + ix]
                                                : 0.0;
                    }
                }
            }
}

inline void col2im_add(const double* col, int cin, int h, int w, int kh, int kw, int stride, int pad,
                       int oh, int ow, double* dx) {
    for (int c = 0; c < cin; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const double* row = col + (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                                              (static_cast<std::size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride + i - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + j - pad;
                        if (ix >= 0 && ix < w)
                            dx[(static_cast<std::size_t>(c) * h + iy) * w + ix] += row[oy * ow + ox];
                    }
                }
            }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    detail::gemm(false, false, m, n, k, 1.0, a.raw(), k, b.raw(), n, 0.0, out.raw(), n);
    detail::check_finite(out, "matmul");
    if (detail::track({&a, &b})) {
        auto pa = a.impl(), pb = b.impl();
        detail::record(out, "matmul", {pa, pb}, [pa, pb, m, k, n](const TensorImpl& o) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                // dA += dY * B^T
                detail::gemm(false, true, m, k, n, 1.0, o.grad.data(), n, pb->data.data(), n, 1.0,
                             pa->grad.data(), k);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                // dB += A^T * dY
                detail::gemm(true, false, k, n, m, 1.0, pa->data.data(), k, o.grad.data(), n, 1.0,
                             pb->grad.data(), n);
            }
        });
    }
    return out;
}

// x (B,in) * w (in,out) + bias (out)
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    return add(matmul(x, w), bias);
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

// x (B,Cin,H,W), w (Cout,Cin,kh,kw), bias (Cout). The im2col buffers are
// recomputed in backward rather than saved; at these sizes the extra GEMM-free
// pass is cheaper than holding per-conv column matrices across a step.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw std::invalid_argument("conv2d: expected 4-D input and kernel, got " +
                                    shape_str(x.shape()) + " and " + shape_str(w.shape()));
    if (x.dim(1) != w.dim(1))
        throw std::invalid_argument("conv2d: input channels " + std::to_string(x.dim(1)) +
                                    " != kernel in-channels " + std::to_string(w.dim(1)) + " for x " +
                                    shape_str(x.shape()) + ", w " + shape_str(w.shape()));
    if (bias.ndim() != 1 || bias.dim(0) != w.dim(0))
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                    " does not match out-channels " + std::to_string(w.dim(0)));
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("conv2d: invalid stride/pad " + std::to_string(stride) + "/" +
                                    std::to_string(pad));

    int B = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv2d: kernel " + shape_str(w.shape()) + " too large for input " +
                                    shape_str(x.shape()));
    int ckk = cin * kh * kw, ohow = oh * ow;

    Tensor out({B, cout, oh, ow});
    std::vector<double> col(static_cast<std::size_t>(ckk) * ohow);
    for (int n = 0; n < B; ++n) {
        detail::im2col(x.raw() + static_cast<std::size_t>(n) * cin * h * wd, cin, h, wd, kh, kw,
                       stride, pad, oh, ow, col.data());
        double* y = out.raw() + static_cast<std::size_t>(n) * cout * ohow;
        detail::gemm(false, false, cout, ohow, ckk, 1.0, w.raw(), ckk, col.data(), ohow, 0.0, y, ohow);
        for (int c = 0; c < cout; ++c) {
            double bv = bias.data()[static_cast<std::size_t>(c)];
            for (int i = 0; i < ohow; ++i) y[static_cast<std::size_t>(c) * ohow + i] += bv;
        }
    }
    detail::check_finite(out, "conv2d");

    if (detail::track({&x, &w, &bias})) {
        auto px = x.impl(), pw = w.impl(), pb = bias.impl();
        detail::record(out, "conv2d", {px, pw, pb},
                       [px, pw, pb, B, cin, h, wd, cout, kh, kw, stride, pad, oh, ow, ckk,
                        ohow](const TensorImpl& o) {
                           std::vector<double> col(static_cast<std::size_t>(ckk) * ohow);
                           std::vector<double> dcol;
                           if (px->requires_grad) {
                               px->ensure_grad();
                               dcol.resize(col.size());
                           }
                           if (pw->requires_grad) pw->ensure_grad();
                           if (pb->requires_grad) pb->ensure_grad();
                           for (int n = 0; n < B; ++n) {
                               const double* dy = o.grad.data() + static_cast<std::size_t>(n) * cout * ohow;
                               if (pw->requires_grad || px->requires_grad)
                                   detail::im2col(px->data.data() + static_cast<std::size_t>(n) * cin * h * wd,
                                                  cin, h, wd, kh, kw, stride, pad, oh, ow, col.data());
                               if (pw->requires_grad)
                                   // dW += dY * col^T
                                   detail::gemm(false, true, cout, ckk, ohow, 1.0, dy, ohow, col.data(),
                                                ohow, 1.0, pw->grad.data(), ckk);
                               if (pb->requires_grad)
                                   for (int c = 0; c < cout; ++c) {
                                       double s = 0.0;
                                       for (int i = 0; i < ohow; ++i)
                                           s += dy[static_cast<std::size_t>(c) * ohow + i];
                                       pb->grad[static_cast<std::size_t>(c)] += s;
                                   }
                               if (px->requires_grad) {
                                   // dcol = W^T * dY, then scatter back
                                   detail::gemm(true, false, ckk, ohow, cout, 1.0, pw->data.data(), ckk,
                                                dy, ohow, 0.0, dcol.data(), ohow);
                                   detail::col2im_add(dcol.data(), cin, h, wd, kh, kw, stride, pad, oh,
                                                      ow,
                                                      px->grad.data() +
                                                          static_cast<std::size_t>(n) * cin * h * wd);
                               }
                           }
                       });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pooling / upsampling
// ---------------------------------------------------------------------------

inline Tensor avgpool2x(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
        throw std::invalid_argument("avgpool2x: expected 4-D input with even spatial dims, got " +
                                    shape_str(x.shape()));
    int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int oh = H / 2, ow = W / 2;
    Tensor out({B, C, oh, ow});
    for (int bc = 0; bc < B * C; ++bc) {
        const double* src = x.raw() + static_cast<std::size_t>(bc) * H * W;
        double* dst = out.raw() + static_cast<std::size_t>(bc) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int xw = 0; xw < ow; ++xw)
                dst[y * ow + xw] = 0.25 * (src[(2 * y) * W + 2 * xw] + src[(2 * y) * W + 2 * xw + 1] +
                                           src[(2 * y + 1) * W + 2 * xw] +
                                           src[(2 * y + 1) * W + 2 * xw + 1]);
    }
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "avgpool2x", {px}, [px, B, C, H, W, oh, ow](const TensorImpl& o) {
            px->ensure_grad();
            for (int bc = 0; bc < B * C; ++bc) {
                const double* g = o.grad.data() + static_cast<std::size_t>(bc) * oh * ow;
                double* dx = px->grad.data() + static_cast<std::size_t>(bc) * H * W;
                for (int y = 0; y < oh; ++y)
                    for (int xw = 0; xw < ow; ++xw) {
                        double v = 0.25 * g[y * ow + xw];
                        dx[(2 * y) * W + 2 * xw] += v;
                        dx[(2 * y) * W + 2 * xw + 1] += v;
                        dx[(2 * y + 1) * W + 2 * xw] += v;
                        dx[(2 * y + 1) * W + 2 * xw + 1] += v;
                    }
            }
        });
    }
    return out;
}

inline Tensor nearest_upsample2x(const Tensor& x) {
    if (x.ndim() != 4)
        throw std::invalid_argument("nearest_upsample2x: expected 4-D input, got " + shape_str(x.shape()));
    int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out({B, C, 2 * H, 2 * W});
    for (int bc = 0; bc < B * C; ++bc) {
        const double* src = x.raw() + static_cast<std::size_t>(bc) * H * W;
        double* dst = out.raw() + static_cast<std::size_t>(bc) * 4 * H * W;
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw) {
                double v = src[y * W + xw];
                dst[(2 * y) * 2 * W + 2 * xw] = v;
                dst[(2 * y) * 2 * W + 2 * xw + 1] = v;
                dst[(2 * y + 1) * 2 * W + 2 * xw] = v;
                dst[(2 * y + 1) * 2 * W + 2 * xw + 1] = v;
            }
    }
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "nearest_upsample2x", {px}, [px, B, C, H, W](const TensorImpl& o) {
            px->ensure_grad();
            for (int bc = 0; bc < B * C; ++bc) {
                const double* g = o.grad.data() + static_cast<std::size_t>(bc) * 4 * H * W;
                double* dx = px->grad.data() + static_cast<std::size_t>(bc) * H * W;
                for (int y = 0; y < H; ++y)
                    for (int xw = 0; xw < W; ++xw)
                        dx[y * W + xw] += g[(2 * y) * 2 * W + 2 * xw] + g[(2 * y) * 2 * W + 2 * xw + 1] +
                                          g[(2 * y + 1) * 2 * W + 2 * xw] +
                                          g[(2 * y + 1) * 2 * W + 2 * xw + 1];
            }
        });
    }
    return out;
}

// Spatial mean (B,C,H,W) -> (B,C); the classifier's global average pool.
inline Tensor spatial_mean(const Tensor& x) {
    if (x.ndim() != 4)
        throw std::invalid_argument("spatial_mean: expected 4-D input, got " + shape_str(x.shape()));
    int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    double inv = 1.0 / HW;
    Tensor out({B, C});
    for (int bc = 0; bc < B * C; ++bc) {
        const double* src = x.raw() + static_cast<std::size_t>(bc) * HW;
        double s = 0.0;
        for (int i = 0; i < HW; ++i) s += src[i];
        out.data()[static_cast<std::size_t>(bc)] = s * inv;
    }
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "spatial_mean", {px}, [px, B, C, HW, inv](const TensorImpl& o) {
            px->ensure_grad();
            for (int bc = 0; bc < B * C; ++bc) {
                double g = o.grad[static_cast<std::size_t>(bc)] * inv;
                double* dx = px->grad.data() + static_cast<std::size_t>(bc) * HW;
                for (int i = 0; i < HW; ++i) dx[i] += g;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// group_norm
// ---------------------------------------------------------------------------

// Normalizes each (sample, group) slab over channels-in-group x H x W, then
// applies per-channel gamma/beta. eps = 1e-5.
inline Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta) {
    if (x.ndim() != 4)
        throw std::invalid_argument("group_norm: expected 4-D input, got " + shape_str(x.shape()));
    int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    if (groups < 1 || C % groups != 0)
        throw std::invalid_argument("group_norm: " + std::to_string(C) + " channels not divisible by " +
                                    std::to_string(groups) + " groups");
    if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C)
        throw std::invalid_argument("group_norm: gamma/beta must be (" + std::to_string(C) + ")");

    const double eps = 1e-5;
    int cpg = C / groups;
    std::size_t slab = static_cast<std::size_t>(cpg) * HW;
    Tensor out(x.shape());
    std::vector<double> mu(static_cast<std::size_t>(B) * groups), istd(static_cast<std::size_t>(B) * groups);

    for (int n = 0; n < B; ++n)
        for (int g = 0; g < groups; ++g) {
            const double* src = x.raw() + (static_cast<std::size_t>(n) * C + g * cpg) * HW;
            double m = 0.0;
            for (std::size_t i = 0; i < slab; ++i) m += src[i];
            m /= static_cast<double>(slab);
            double var = 0.0;
            for (std::size_t i = 0; i < slab; ++i) {
                double d = src[i] - m;
                var += d * d;
            }
            var /= static_cast<double>(slab);
            double is = 1.0 / std::sqrt(var + eps);
            mu[static_cast<std::size_t>(n) * groups + g] = m;
            istd[static_cast<std::size_t>(n) * groups + g] = is;
            double* dst = out.raw() + (static_cast<std::size_t>(n) * C + g * cpg) * HW;
            for (int c = 0; c < cpg; ++c) {
                double ga = gamma.data()[static_cast<std::size_t>(g) * cpg + c];
                double be = beta.data()[static_cast<std::size_t>(g) * cpg + c];
                for (int i = 0; i < HW; ++i)
                    dst[static_cast<std::size_t>(c) * HW + i] =
                        ga * (src[static_cast<std::size_t>(c) * HW + i] - m) * is + be;
            }
        }
    detail::check_finite(out, "group_norm");

    if (detail::track({&x, &gamma, &beta})) {
        auto px = x.impl(), pg = gamma.impl(), pb = beta.impl();
        detail::record(
            out, "group_norm", {px, pg, pb},
            [px, pg, pb, B, C, HW, groups, cpg, slab, mu, istd](const TensorImpl& o) {
                if (px->requires_grad) px->ensure_grad();
                if (pg->requires_grad) pg->ensure_grad();
                if (pb->requires_grad) pb->ensure_grad();
                double inv_m = 1.0 / static_cast<double>(slab);
                for (int n = 0; n < B; ++n)
                    for (int g = 0; g < groups; ++g) {
                        std::size_t base = (static_cast<std::size_t>(n) * C + g * cpg) * HW;
                        const double* xv = px->data.data() + base;
                        const double* gy = o.grad.data() + base;
                        double m = mu[static_cast<std::size_t>(n) * groups + g];
                        double is = istd[static_cast<std::size_t>(n) * groups + g];
                        // per-channel reductions
                        for (int c = 0; c < cpg; ++c) {
                            double sg = 0.0, sgx = 0.0;
                            for (int i = 0; i < HW; ++i) {
                                double xh = (xv[static_cast<std::size_t>(c) * HW + i] - m) * is;
                                sg += gy[static_cast<std::size_t>(c) * HW + i];
                                sgx += gy[static_cast<std::size_t>(c) * HW + i] * xh;
                            }
                            if (pg->requires_grad) pg->grad[static_cast<std::size_t>(g) * cpg + c] += sgx;
                            if (pb->requires_grad) pb->grad[static_cast<std::size_t>(g) * cpg + c] += sg;
                        }
                        if (px->requires_grad) {
                            // group-wide means of dyhat and dyhat*xhat
                            double mean_dh = 0.0, mean_dhx = 0.0;
                            for (int c = 0; c < cpg; ++c) {
                                double ga = pg->data[static_cast<std::size_t>(g) * cpg + c];
                                for (int i = 0; i < HW; ++i) {
                                    double xh = (xv[static_cast<std::size_t>(c) * HW + i] - m) * is;
                                    double dh = gy[static_cast<std::size_t>(c) * HW + i] * ga;
                                    mean_dh += dh;
                                    mean_dhx += dh * xh;
                                }
                            }
                            mean_dh *= inv_m;
                            mean_dhx *= inv_m;
                            double* dx = px->grad.data() + base;
                            for (int c = 0; c < cpg; ++c) {
                                double ga = pg->data[static_cast<std::size_t>(g) * cpg + c];
                                for (int i = 0; i < HW; ++i) {
                                    double xh = (xv[static_cast<std::size_t>(c) * HW + i] - m) * is;
                                    double dh = gy[static_cast<std::size_t>(c) * HW + i] * ga;
                                    dx[static_cast<std::size_t>(c) * HW + i] +=
                                        is * (dh - mean_dh - xh * mean_dhx);
                                }
                            }
                        }
                    }
            });
    }
    return out;
}

inline int default_groups(int channels) { return std::min(8, channels); }

}  // namespace drcb
