#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drcb/rng.hpp"

namespace drcb {

struct TensorImpl;

// One recorded forward op. Nodes are created in program order, so ids are a
// topological order of the DAG; backward() walks them once, descending.
struct TapeNode {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Receives the output impl (for its grad and, where useful, its data) and
    // accumulates into parents' grads.
    std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated lazily, same size as data
    std::int64_t id = -1;
    std::unique_ptr<TapeNode> node;  // null for leaves

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

inline std::int64_t next_tensor_id() {
    static std::atomic<std::int64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables tape recording in scope (sampling, evaluation).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, bool requires_grad = false) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0)
                throw std::invalid_argument("Tensor: non-positive extent in shape " + shape_str(shape));
            n *= static_cast<std::size_t>(d);
        }
        impl_ = std::make_shared<TensorImpl>();
        impl_->shape = std::move(shape);
        impl_->data.assign(n, 0.0);
        impl_->requires_grad = requires_grad;
        impl_->id = next_tensor_id();
    }

    static Tensor scalar(double v) {
        Tensor t({1});
        t.impl_->data[0] = v;
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad = false) {
        Tensor t(std::move(shape));
        if (data.size() != t.numel())
            throw std::invalid_argument("Tensor::from_data: " + std::to_string(data.size()) +
                                        " values for shape " + shape_str(t.shape()));
        t.impl_->data = std::move(data);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        for (double& v : t.impl_->data) v = rng.uniform(lo, hi);
        return t;
    }

    static Tensor randn(std::vector<int> shape, Rng& rng, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        for (double& v : t.impl_->data) v = rng.normal();
        return t;
    }

    // Detached value copy; never carries tape history.
    Tensor clone() const {
        Tensor t(impl_->shape);
        t.impl_->data = impl_->data;
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    std::size_t numel() const { return impl_->data.size(); }
    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }
    double* raw() { return impl_->data.data(); }
    const double* raw() const { return impl_->data.data(); }

    double item() const {
        if (numel() != 1)
            throw std::invalid_argument("Tensor::item: tensor of shape " + shape_str(shape()) + " is not scalar");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool b) { impl_->requires_grad = b; }

    bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
    std::vector<double>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    const std::vector<double>& grad() const {
        if (!has_grad())
            throw std::runtime_error("Tensor::grad: no gradient accumulated for tensor of shape " +
                                     shape_str(shape()));
        return impl_->grad;
    }
    void zero_grad() {
        if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

namespace detail {

#ifndef NDEBUG
inline void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data())
        if (!std::isfinite(v))
            throw std::runtime_error(std::string(op) + ": non-finite value in output of shape " +
                                     shape_str(t.shape()));
}
#else
inline void check_finite(const Tensor&, const char*) {}
#endif

inline bool track(std::initializer_list<const Tensor*> inputs) {
    if (!grad_mode()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Attaches a tape node; `out` becomes requires_grad.
inline void record(Tensor& out, const char* op, std::vector<std::shared_ptr<TensorImpl>> parents,
                   std::function<void(const TensorImpl&)> backward) {
    auto node = std::make_unique<TapeNode>();
    node->op = op;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
    out.impl()->node = std::move(node);
    out.impl()->requires_grad = true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / basic ops
// ---------------------------------------------------------------------------

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

// add(a, b) supports same-shape operands, plus two broadcast forms the
// networks need: (B,C,H,W)+(B,C) per-channel injection and (B,N)+(N) bias.
inline Tensor add(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    Tensor out(sa);

    enum class Mode { Same, ChannelBC, RowBias } mode;
    if (sa == sb) {
        mode = Mode::Same;
        for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    } else if (sa.size() == 4 && sb.size() == 2 && sa[0] == sb[0] && sa[1] == sb[1]) {
        mode = Mode::ChannelBC;
        int B = sa[0], C = sa[1], HW = sa[2] * sa[3];
        for (int n = 0; n < B; ++n)
            for (int c = 0; c < C; ++c) {
                double v = b.data()[static_cast<std::size_t>(n) * C + c];
                const double* pa = a.raw() + (static_cast<std::size_t>(n) * C + c) * HW;
                double* po = out.raw() + (static_cast<std::size_t>(n) * C + c) * HW;
                for (int i = 0; i < HW; ++i) po[i] = pa[i] + v;
            }
    } else if (sa.size() == 2 && sb.size() == 1 && sa[1] == sb[0]) {
        mode = Mode::RowBias;
        int B = sa[0], N = sa[1];
        for (int n = 0; n < B; ++n)
            for (int j = 0; j < N; ++j)
                out.data()[static_cast<std::size_t>(n) * N + j] =
                    a.data()[static_cast<std::size_t>(n) * N + j] + b.data()[j];
    } else {
        throw std::invalid_argument("add: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
    }
    detail::check_finite(out, "add");

    if (detail::track({&a, &b})) {
        auto pa = a.impl(), pb = b.impl();
        detail::record(out, "add", {pa, pb}, [pa, pb, mode](const TensorImpl& o) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                if (mode == Mode::Same) {
                    for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
                } else if (mode == Mode::ChannelBC) {
                    int B = o.shape[0], C = o.shape[1], HW = o.shape[2] * o.shape[3];
                    for (int n = 0; n < B; ++n)
                        for (int c = 0; c < C; ++c) {
                            const double* g = o.grad.data() + (static_cast<std::size_t>(n) * C + c) * HW;
                            double s = 0.0;
                            for (int i = 0; i < HW; ++i) s += g[i];
                            pb->grad[static_cast<std::size_t>(n) * C + c] += s;
                        }
                } else {
                    int B = o.shape[0], N = o.shape[1];
                    for (int n = 0; n < B; ++n)
                        for (int j = 0; j < N; ++j)
                            pb->grad[j] += o.grad[static_cast<std::size_t>(n) * N + j];
                }
            }
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::check_finite(out, "mul");
    if (detail::track({&a, &b})) {
        auto pa = a.impl(), pb = b.impl();
        detail::record(out, "mul", {pa, pb}, [pa, pb](const TensorImpl& o) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->data[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->data[i];
            }
        });
    }
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * s;
    detail::check_finite(out, "scale");
    if (detail::track({&a})) {
        auto pa = a.impl();
        detail::record(out, "scale", {pa}, [pa, s](const TensorImpl& o) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * s;
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (detail::track({&a, &b})) {
        auto pa = a.impl(), pb = b.impl();
        detail::record(out, "sub", {pa, pb}, [pa, pb](const TensorImpl& o) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] -= o.grad[i];
            }
        });
    }
    return out;
}

inline Tensor silu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        double v = x.data()[i];
        out.data()[i] = v / (1.0 + std::exp(-v));
    }
    detail::check_finite(out, "silu");
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "silu", {px}, [px](const TensorImpl& o) {
            px->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                double v = px->data[i];
                double sig = 1.0 / (1.0 + std::exp(-v));
                px->grad[i] += o.grad[i] * sig * (1.0 + v * (1.0 - sig));
            }
        });
    }
    return out;
}

inline Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "relu", {px}, [px](const TensorImpl& o) {
            px->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                if (px->data[i] > 0.0) px->grad[i] += o.grad[i];
        });
    }
    return out;
}

inline Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
    std::size_t n = 1;
    for (int d : new_shape) n *= static_cast<std::size_t>(d);
    if (n != x.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                    shape_str(new_shape));
    Tensor out(std::move(new_shape));
    out.data() = x.data();
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "reshape", {px}, [px](const TensorImpl& o) {
            px->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
        });
    }
    return out;
}

// Concatenation along axis 1 (channels for 4-D, columns for 2-D).
inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (axis != 1 || sa.size() != sb.size() || (sa.size() != 4 && sa.size() != 2))
        throw std::invalid_argument("concat: only axis 1 of 2-D/4-D tensors supported, got axis " +
                                    std::to_string(axis) + " with " + shape_str(sa));
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (i != 1 && sa[i] != sb[i])
            throw std::invalid_argument("concat: shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));

    std::vector<int> so = sa;
    so[1] = sa[1] + sb[1];
    Tensor out(so);

    // inner = elements per channel-slice, outer = leading (batch) extent
    std::size_t inner = 1;
    for (std::size_t i = 2; i < sa.size(); ++i) inner *= static_cast<std::size_t>(sa[i]);
    int outer = sa[0];
    std::size_t ca = static_cast<std::size_t>(sa[1]) * inner, cb = static_cast<std::size_t>(sb[1]) * inner;
    for (int n = 0; n < outer; ++n) {
        std::copy_n(a.raw() + n * ca, ca, out.raw() + n * (ca + cb));
        std::copy_n(b.raw() + n * cb, cb, out.raw() + n * (ca + cb) + ca);
    }
    if (detail::track({&a, &b})) {
        auto pa = a.impl(), pb = b.impl();
        detail::record(out, "concat", {pa, pb}, [pa, pb, outer, ca, cb](const TensorImpl& o) {
            for (int n = 0; n < outer; ++n) {
                const double* g = o.grad.data() + n * (ca + cb);
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    for (std::size_t i = 0; i < ca; ++i) pa->grad[n * ca + i] += g[i];
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    for (std::size_t i = 0; i < cb; ++i) pb->grad[n * cb + i] += g[ca + i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "sum", {px}, [px](const TensorImpl& o) {
            px->ensure_grad();
            double g = o.grad[0];
            for (double& v : px->grad) v += g;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::scalar(s * inv);
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "mean", {px}, [px, inv](const TensorImpl& o) {
            px->ensure_grad();
            double g = o.grad[0] * inv;
            for (double& v : px->grad) v += g;
        });
    }
    return out;
}

// Mean-reduced squared error over all elements.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("mse_loss", pred, target);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    double inv = 1.0 / static_cast<double>(pred.numel());
    Tensor out = Tensor::scalar(s * inv);
    if (detail::track({&pred, &target})) {
        auto pp = pred.impl(), pt = target.impl();
        detail::record(out, "mse_loss", {pp, pt}, [pp, pt, inv](const TensorImpl& o) {
            double g = o.grad[0] * 2.0 * inv;
            if (pp->requires_grad) {
                pp->ensure_grad();
                for (std::size_t i = 0; i < pp->data.size(); ++i)
                    pp->grad[i] += g * (pp->data[i] - pt->data[i]);
            }
            if (pt->requires_grad) {
                pt->ensure_grad();
                for (std::size_t i = 0; i < pt->data.size(); ++i)
                    pt->grad[i] -= g * (pp->data[i] - pt->data[i]);
            }
        });
    }
    return out;
}

// Softmax over the last axis.
inline Tensor softmax(const Tensor& x, int axis) {
    int nd = x.ndim();
    if (axis < 0) axis += nd;
    if (axis != nd - 1)
        throw std::invalid_argument("softmax: only the last axis is supported, got axis " +
                                    std::to_string(axis) + " for " + shape_str(x.shape()));
    int cols = x.dim(nd - 1);
    std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* px = x.raw() + r * cols;
        double* po = out.raw() + r * cols;
        double mx = px[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, px[j]);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            po[j] = std::exp(px[j] - mx);
            z += po[j];
        }
        for (int j = 0; j < cols; ++j) po[j] /= z;
    }
    detail::check_finite(out, "softmax");
    if (detail::track({&x})) {
        auto px = x.impl();
        detail::record(out, "softmax", {px}, [px, rows, cols](const TensorImpl& o) {
            px->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = o.data.data() + r * cols;
                const double* gy = o.grad.data() + r * cols;
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += gy[j] * y[j];
                double* gx = px->grad.data() + r * cols;
                for (int j = 0; j < cols; ++j) gx[j] += y[j] * (gy[j] - dot);
            }
        });
    }
    return out;
}

// Cross-entropy on raw logits (B,K) against integer labels, mean-reduced over
// the batch. Computed via log-sum-exp; no label smoothing.
inline Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw std::invalid_argument("cross_entropy_logits: expected (B,K) logits, got " +
                                    shape_str(logits.shape()));
    int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("cross_entropy_logits: " + std::to_string(labels.size()) +
                                    " labels for batch " + std::to_string(B));
    for (int y : labels)
        if (y < 0 || y >= K)
            throw std::invalid_argument("cross_entropy_logits: label " + std::to_string(y) +
                                        " out of range [0," + std::to_string(K) + ")");
    double loss = 0.0;
    for (int n = 0; n < B; ++n) {
        const double* p = logits.raw() + static_cast<std::size_t>(n) * K;
        double mx = p[0];
        for (int j = 1; j < K; ++j) mx = std::max(mx, p[j]);
        double z = 0.0;
        for (int j = 0; j < K; ++j) z += std::exp(p[j] - mx);
        loss += std::log(z) + mx - p[labels[static_cast<std::size_t>(n)]];
    }
    Tensor out = Tensor::scalar(loss / B);
    if (detail::track({&logits})) {
        auto pl = logits.impl();
        auto lab = labels;
        detail::record(out, "cross_entropy_logits", {pl}, [pl, lab, B, K](const TensorImpl& o) {
            pl->ensure_grad();
            double g = o.grad[0] / B;
            for (int n = 0; n < B; ++n) {
                const double* p = pl->data.data() + static_cast<std::size_t>(n) * K;
                double* gp = pl->grad.data() + static_cast<std::size_t>(n) * K;
                double mx = p[0];
                for (int j = 1; j < K; ++j) mx = std::max(mx, p[j]);
                double z = 0.0;
                for (int j = 0; j < K; ++j) z += std::exp(p[j] - mx);
                for (int j = 0; j < K; ++j) {
                    double soft = std::exp(p[j] - mx) / z;
                    gp[j] += g * (soft - (j == lab[static_cast<std::size_t>(n)] ? 1.0 : 0.0));
                }
            }
        });
    }
    return out;
}

// Row lookup: table (K,D), one output row per index. Gradient scatters back
// into the indexed rows.
inline Tensor embed(const Tensor& table, const std::vector<int>& indices) {
    if (table.ndim() != 2)
        throw std::invalid_argument("embed: expected (K,D) table, got " + shape_str(table.shape()));
    int K = table.dim(0), D = table.dim(1);
    int B = static_cast<int>(indices.size());
    for (int ix : indices)
        if (ix < 0 || ix >= K)
            throw std::invalid_argument("embed: index " + std::to_string(ix) + " out of range [0," +
                                        std::to_string(K) + ")");
    Tensor out({B, D});
    for (int n = 0; n < B; ++n)
        std::copy_n(table.raw() + static_cast<std::size_t>(indices[static_cast<std::size_t>(n)]) * D, D,
                    out.raw() + static_cast<std::size_t>(n) * D);
    if (detail::track({&table})) {
        auto pt = table.impl();
        auto idx = indices;
        detail::record(out, "embed", {pt}, [pt, idx, D](const TensorImpl& o) {
            pt->ensure_grad();
            for (std::size_t n = 0; n < idx.size(); ++n) {
                const double* g = o.grad.data() + n * D;
                double* dst = pt->grad.data() + static_cast<std::size_t>(idx[n]) * D;
                for (int j = 0; j < D; ++j) dst[j] += g[j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Accumulates d(loss)/d(leaf) into
// every requires_grad leaf, then clears the tape (nodes and saved state).
inline void backward(Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    if (!loss.impl()->node)
        throw std::invalid_argument("backward: loss is not attached to a tape");

    // Collect reachable impls (iterative DFS to keep deep chains off the
    // C++ stack).
    std::vector<std::shared_ptr<TensorImpl>> reachable;
    std::vector<std::shared_ptr<TensorImpl>> stack{loss.impl()};
    std::vector<const TensorImpl*> seen;
    auto visited = [&seen](const TensorImpl* p) {
        return std::find(seen.begin(), seen.end(), p) != seen.end();
    };
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        if (visited(cur.get())) continue;
        seen.push_back(cur.get());
        reachable.push_back(cur);
        if (cur->node)
            for (auto& p : cur->node->parents)
                if (!visited(p.get())) stack.push_back(p);
    }
    std::sort(reachable.begin(), reachable.end(),
              [](const auto& a, const auto& b) { return a->id > b->id; });

    loss.impl()->ensure_grad();
    loss.impl()->grad[0] = 1.0;

    for (auto& impl : reachable) {
        if (!impl->node) continue;
        if (impl->grad.size() == impl->data.size()) impl->node->backward(*impl);
        impl->node.reset();  // tape cleared
    }
}

inline void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace drcb
