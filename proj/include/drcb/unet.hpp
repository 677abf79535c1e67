#pragma once

#include <json.hpp>

#include "drcb/checkpoint.hpp"
#include "drcb/diffusion.hpp"
#include "drcb/nn.hpp"
#include "drcb/optim.hpp"
#include "drcb/rng.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

struct DenoiserConfig {
    int base = 32;
    std::vector<int> mults = {1, 2, 4};
    int emb_dim = 64;
    int classes = 10;
    int resolution = 32;
    double freq_base = 10000.0;

    int levels() const { return static_cast<int>(mults.size()); }

    void validate() const {
        if (base < 1 || classes < 1 || mults.empty())
            throw std::invalid_argument("DenoiserConfig: base/classes/mults must be positive");
        if (emb_dim < 2 || emb_dim % 2 != 0)
            throw std::invalid_argument("DenoiserConfig: emb_dim must be even and >= 2");
        int down = 1 << (levels() - 1);
        if (resolution % down != 0)
            throw std::invalid_argument("DenoiserConfig: resolution " + std::to_string(resolution) +
                                        " not divisible by " + std::to_string(down));
    }
};

// Two levels at 16x16, three at 32x32.
inline DenoiserConfig default_denoiser_config(int resolution, int classes) {
    DenoiserConfig c;
    c.resolution = resolution;
    c.classes = classes;
    c.mults = resolution <= 16 ? std::vector<int>{1, 2} : std::vector<int>{1, 2, 4};
    return c;
}

// [sin(t*w_k) | cos(t*w_k)], w_k = base^(-2k/d), k = 0..d/2-1.
inline std::vector<double> sinusoidal_embed(double t, int d, double base = 10000.0) {
    if (d < 2 || d % 2 != 0)
        throw std::invalid_argument("sinusoidal_embed: d must be even and >= 2, got " +
                                    std::to_string(d));
    if (t < 0.0) throw std::invalid_argument("sinusoidal_embed: t must be >= 0");
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int k = 0; k < d / 2; ++k) {
        double w = std::pow(base, -2.0 * k / d);
        out[static_cast<std::size_t>(k)] = std::sin(t * w);
        out[static_cast<std::size_t>(d / 2 + k)] = std::cos(t * w);
    }
    return out;
}

namespace detail_unet {

inline Tensor init_weight(std::vector<int> shape, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, true);
}

inline Tensor zeros_param(std::vector<int> shape) {
    Tensor t(std::move(shape), true);
    return t;
}

inline Tensor ones_param(std::vector<int> shape) {
    Tensor t(std::move(shape), true);
    std::fill(t.data().begin(), t.data().end(), 1.0);
    return t;
}

}  // namespace detail_unet

// Residual block: GN -> SiLU -> conv3x3 -> +cond projection -> GN -> SiLU ->
// conv3x3, plus a 1x1-projected skip when the channel count changes.
struct ResBlock {
    int cin = 0, cout = 0;
    Tensor gn1_g, gn1_b, conv1_w, conv1_b;
    Tensor cond_w, cond_b;  // emb_dim -> cout
    Tensor gn2_g, gn2_b, conv2_w, conv2_b;
    Tensor skip_w, skip_b;  // only when cin != cout

    void build(int cin_, int cout_, int emb_dim, Rng& rng) {
        cin = cin_;
        cout = cout_;
        gn1_g = detail_unet::ones_param({cin});
        gn1_b = detail_unet::zeros_param({cin});
        conv1_w = detail_unet::init_weight({cout, cin, 3, 3}, cin * 9, rng);
        conv1_b = detail_unet::zeros_param({cout});
        cond_w = detail_unet::init_weight({emb_dim, cout}, emb_dim, rng);
        cond_b = detail_unet::zeros_param({cout});
        gn2_g = detail_unet::ones_param({cout});
        gn2_b = detail_unet::zeros_param({cout});
        conv2_w = detail_unet::init_weight({cout, cout, 3, 3}, cout * 9, rng);
        conv2_b = detail_unet::zeros_param({cout});
        if (cin != cout) {
            skip_w = detail_unet::init_weight({cout, cin, 1, 1}, cin, rng);
            skip_b = detail_unet::zeros_param({cout});
        }
    }

    Tensor forward(const Tensor& x, const Tensor& cond) const {
        Tensor h = conv2d(silu(group_norm(x, default_groups(cin), gn1_g, gn1_b)), conv1_w, conv1_b, 1, 1);
        h = add(h, linear(cond, cond_w, cond_b));  // (B,C,H,W) + (B,C)
        h = conv2d(silu(group_norm(h, default_groups(cout), gn2_g, gn2_b)), conv2_w, conv2_b, 1, 1);
        Tensor s = cin == cout ? x : conv2d(x, skip_w, skip_b, 1, 0);
        return add(h, s);
    }

    void collect(const std::string& prefix, NamedTensors& out) const {
        out.emplace_back(prefix + ".gn1.g", gn1_g);
        out.emplace_back(prefix + ".gn1.b", gn1_b);
        out.emplace_back(prefix + ".conv1.w", conv1_w);
        out.emplace_back(prefix + ".conv1.b", conv1_b);
        out.emplace_back(prefix + ".cond.w", cond_w);
        out.emplace_back(prefix + ".cond.b", cond_b);
        out.emplace_back(prefix + ".gn2.g", gn2_g);
        out.emplace_back(prefix + ".gn2.b", gn2_b);
        out.emplace_back(prefix + ".conv2.w", conv2_w);
        out.emplace_back(prefix + ".conv2.b", conv2_b);
        if (cin != cout) {
            out.emplace_back(prefix + ".skip.w", skip_w);
            out.emplace_back(prefix + ".skip.b", skip_b);
        }
    }
};

class Denoiser {
public:
    explicit Denoiser(const DenoiserConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        Rng rng = Rng::stream(seed, 0xdece);
        int L = cfg_.levels();

        time_w_ = detail_unet::init_weight({cfg_.emb_dim, cfg_.emb_dim}, cfg_.emb_dim, rng);
        time_b_ = detail_unet::zeros_param({cfg_.emb_dim});
        class_table_ = detail_unet::init_weight({cfg_.classes, cfg_.emb_dim}, cfg_.emb_dim, rng);

        stem_w_ = detail_unet::init_weight({width(0), 3, 3, 3}, 3 * 9, rng);
        stem_b_ = detail_unet::zeros_param({width(0)});

        down_.resize(static_cast<std::size_t>(L));
        down_samp_w_.resize(static_cast<std::size_t>(L));
        down_samp_b_.resize(static_cast<std::size_t>(L));
        int ch = width(0);
        for (int l = 0; l < L; ++l) {
            down_[static_cast<std::size_t>(l)].build(ch, width(l), cfg_.emb_dim, rng);
            ch = width(l);
            if (l + 1 < L) {  // stride-2 conv downsample
                down_samp_w_[static_cast<std::size_t>(l)] =
                    detail_unet::init_weight({ch, ch, 3, 3}, ch * 9, rng);
                down_samp_b_[static_cast<std::size_t>(l)] = detail_unet::zeros_param({ch});
            }
        }
        mid_.build(ch, ch, cfg_.emb_dim, rng);

        up_.resize(static_cast<std::size_t>(L));
        up_samp_w_.resize(static_cast<std::size_t>(L));
        up_samp_b_.resize(static_cast<std::size_t>(L));
        for (int l = L - 1; l >= 0; --l) {
            up_[static_cast<std::size_t>(l)].build(ch + width(l), width(l), cfg_.emb_dim, rng);
            ch = width(l);
            if (l > 0) {  // nearest upsample then conv
                up_samp_w_[static_cast<std::size_t>(l)] =
                    detail_unet::init_weight({ch, ch, 3, 3}, ch * 9, rng);
                up_samp_b_[static_cast<std::size_t>(l)] = detail_unet::zeros_param({ch});
            }
        }

        head_w_ = detail_unet::init_weight({3, width(0), 3, 3}, width(0) * 9, rng);
        head_b_ = detail_unet::zeros_param({3});
    }

    const DenoiserConfig& config() const { return cfg_; }
    int width(int level) const { return cfg_.base * cfg_.mults[static_cast<std::size_t>(level)]; }

    Tensor forward(const Tensor& x, const std::vector<int>& t, const std::vector<int>& labels) const {
        if (x.ndim() != 4 || x.dim(1) != 3)
            throw std::invalid_argument("Denoiser::forward: expected (B,3,H,W), got " +
                                        shape_str(x.shape()));
        int B = x.dim(0);
        if (static_cast<int>(t.size()) != B || static_cast<int>(labels.size()) != B)
            throw std::invalid_argument("Denoiser::forward: t/labels size mismatch with batch");
        for (int lb : labels)
            if (lb < 0 || lb >= cfg_.classes)
                throw std::invalid_argument("Denoiser::forward: label " + std::to_string(lb) +
                                            " outside [0," + std::to_string(cfg_.classes) + ")");

        Tensor sin_emb({B, cfg_.emb_dim});
        for (int b = 0; b < B; ++b) {
            auto e = sinusoidal_embed(static_cast<double>(t[static_cast<std::size_t>(b)]), cfg_.emb_dim,
                                      cfg_.freq_base);
            std::copy(e.begin(), e.end(),
                      sin_emb.raw() + static_cast<std::size_t>(b) * cfg_.emb_dim);
        }
        Tensor cond = add(linear(sin_emb, time_w_, time_b_), embed(class_table_, labels));

        int L = cfg_.levels();
        Tensor h = conv2d(x, stem_w_, stem_b_, 1, 1);
        std::vector<Tensor> skips;
        skips.reserve(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            h = down_[static_cast<std::size_t>(l)].forward(h, cond);
            skips.push_back(h);
            if (l + 1 < L)
                h = conv2d(h, down_samp_w_[static_cast<std::size_t>(l)],
                           down_samp_b_[static_cast<std::size_t>(l)], 2, 1);
        }
        h = mid_.forward(h, cond);
        for (int l = L - 1; l >= 0; --l) {
            h = up_[static_cast<std::size_t>(l)].forward(
                concat(h, skips[static_cast<std::size_t>(l)], 1), cond);
            if (l > 0)
                h = conv2d(nearest_upsample2x(h), up_samp_w_[static_cast<std::size_t>(l)],
                           up_samp_b_[static_cast<std::size_t>(l)], 1, 1);
        }
        // The head is a plain linear conv. Normalizing here would make the
        // prediction invariant to the state's per-image mean, severing the
        // only feedback that keeps that mode of the sampling recursion from
        // drifting; the res-block trunk carries it to this conv untouched.
        h = conv2d(h, head_w_, head_b_, 1, 1);
        return h;
    }

    NamedTensors parameters() const {
        NamedTensors out;
        out.emplace_back("time.w", time_w_);
        out.emplace_back("time.b", time_b_);
        out.emplace_back("class.table", class_table_);
        out.emplace_back("stem.w", stem_w_);
        out.emplace_back("stem.b", stem_b_);
        int L = cfg_.levels();
        for (int l = 0; l < L; ++l) {
            down_[static_cast<std::size_t>(l)].collect("down" + std::to_string(l), out);
            if (l + 1 < L) {
                out.emplace_back("down" + std::to_string(l) + ".samp.w",
                                 down_samp_w_[static_cast<std::size_t>(l)]);
                out.emplace_back("down" + std::to_string(l) + ".samp.b",
                                 down_samp_b_[static_cast<std::size_t>(l)]);
            }
        }
        mid_.collect("mid", out);
        for (int l = L - 1; l >= 0; --l) {
            up_[static_cast<std::size_t>(l)].collect("up" + std::to_string(l), out);
            if (l > 0) {
                out.emplace_back("up" + std::to_string(l) + ".samp.w",
                                 up_samp_w_[static_cast<std::size_t>(l)]);
                out.emplace_back("up" + std::to_string(l) + ".samp.b",
                                 up_samp_b_[static_cast<std::size_t>(l)]);
            }
        }
        out.emplace_back("head.w", head_w_);
        out.emplace_back("head.b", head_b_);
        return out;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (auto& [name, p] : parameters()) n += p.numel();
        return n;
    }

    // Closed-form count; kept in sync with the structure above and asserted
    // against param_count() in tests. For widths w_l = base*mults[l]:
    //   res(cin,cout) = 2*cin + 9*cin*cout + (emb+1)*cout + 2*cout
    //                 + 9*cout*cout + cout + [cin!=cout](cin*cout + cout)
    //   total = emb*(emb+1) + K*emb + (27+1)*w_0      (time, class, stem)
    //         + sum_l res(w_{l-1 or 0}, w_l) + [l<L-1](9*w_l^2 + w_l)
    //         + res(w_top, w_top)                       (mid)
    //         + sum_l res(w_l + w_in, w_l) + [l>0](9*w_l^2 + w_l)
    //         + 27*w_0 + 3                               (head)
    static std::size_t expected_param_count(const DenoiserConfig& cfg) {
        auto res = [&](std::size_t cin, std::size_t cout) {
            std::size_t n = 2 * cin + 9 * cin * cout + cout +
                            (static_cast<std::size_t>(cfg.emb_dim) + 1) * cout + 2 * cout +
                            9 * cout * cout + cout;
            if (cin != cout) n += cin * cout + cout;
            return n;
        };
        std::size_t emb = static_cast<std::size_t>(cfg.emb_dim);
        std::size_t n = emb * emb + emb + static_cast<std::size_t>(cfg.classes) * emb;
        std::size_t L = cfg.mults.size();
        auto w = [&](std::size_t l) {
            return static_cast<std::size_t>(cfg.base) * static_cast<std::size_t>(cfg.mults[l]);
        };
        n += 27 * w(0) + w(0);  // stem
        std::size_t ch = w(0);
        for (std::size_t l = 0; l < L; ++l) {
            n += res(ch, w(l));
            ch = w(l);
            if (l + 1 < L) n += 9 * ch * ch + ch;
        }
        n += res(ch, ch);  // mid
        for (std::size_t l = L; l-- > 0;) {
            n += res(ch + w(l), w(l));
            ch = w(l);
            if (l > 0) n += 9 * ch * ch + ch;
        }
        n += 27 * w(0) + 3;  // head
        return n;
    }

    EpsPredictor predictor() const {
        return [this](const Tensor& xt, const std::vector<int>& t, const std::vector<int>& labels) {
            NoGradGuard ng;
            return forward(xt, t, labels);
        };
    }

    void save(const std::string& path, const json& extra_meta = json::object()) const {
        json meta = extra_meta;
        meta["kind"] = "denoiser";
        meta["config"] = {{"base", cfg_.base},      {"mults", cfg_.mults},
                          {"emb_dim", cfg_.emb_dim}, {"classes", cfg_.classes},
                          {"resolution", cfg_.resolution}, {"freq_base", cfg_.freq_base}};
        save_checkpoint(path, parameters(), meta);
    }

    static Denoiser load(const std::string& path, json* meta_out = nullptr) {
        Checkpoint ck = load_checkpoint(path);
        if (ck.meta.value("kind", "") != "denoiser")
            throw std::runtime_error("Denoiser::load: " + path + " is not a denoiser checkpoint");
        const json& c = ck.meta.at("config");
        DenoiserConfig cfg;
        cfg.base = c.at("base").get<int>();
        cfg.mults = c.at("mults").get<std::vector<int>>();
        cfg.emb_dim = c.at("emb_dim").get<int>();
        cfg.classes = c.at("classes").get<int>();
        cfg.resolution = c.at("resolution").get<int>();
        cfg.freq_base = c.at("freq_base").get<double>();
        Denoiser d(cfg, 0);
        for (auto& [name, p] : d.parameters()) {
            const Tensor& src = ck.at(name);
            if (src.shape() != p.shape())
                throw std::runtime_error("Denoiser::load: shape mismatch for " + name);
            Tensor dst = p;  // shared impl; overwrite values in place
            std::copy(src.raw(), src.raw() + src.numel(), dst.raw());
        }
        if (meta_out) *meta_out = ck.meta;
        return d;
    }

private:
    DenoiserConfig cfg_;
    Tensor time_w_, time_b_, class_table_;
    Tensor stem_w_, stem_b_;
    std::vector<ResBlock> down_, up_;
    std::vector<Tensor> down_samp_w_, down_samp_b_, up_samp_w_, up_samp_b_;
    ResBlock mid_;
    Tensor head_w_, head_b_;
};

struct DenoiserTrainConfig {
    int steps = 4500;
    int batch = 16;
    double lr = 3e-4;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    int log_every = 100;
};

// Single-stream SGD loop over random minibatches (with replacement).
// Deterministic for a fixed seed. Throws on non-finite loss.
inline std::vector<double> train_denoiser(Denoiser& model, const Tensor& images,
                                          const std::vector<int>& labels, const NoiseSchedule& sched,
                                          const DenoiserTrainConfig& tc, std::ostream* log = nullptr) {
    if (!images.defined() || images.dim(0) == 0)
        throw std::invalid_argument("train_denoiser: empty dataset");
    int N = images.dim(0);
    std::size_t per = images.numel() / static_cast<std::size_t>(N);

    std::vector<Tensor> params;
    for (auto& [name, p] : model.parameters()) params.push_back(p);
    AdamWConfig oc;
    oc.lr = tc.lr;
    oc.weight_decay = tc.weight_decay;
    AdamW opt(params, oc);

    Rng rng = Rng::stream(tc.seed, 0x7a11);
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(tc.steps));
    EpsPredictor fwd = [&model](const Tensor& xt, const std::vector<int>& t,
                                const std::vector<int>& lab) { return model.forward(xt, t, lab); };
    for (int step = 0; step < tc.steps; ++step) {
        Tensor x0({tc.batch, images.dim(1), images.dim(2), images.dim(3)});
        std::vector<int> lab(static_cast<std::size_t>(tc.batch));
        for (int b = 0; b < tc.batch; ++b) {
            int idx = rng.uniform_int(N);
            std::copy_n(images.raw() + per * static_cast<std::size_t>(idx), per,
                        x0.raw() + per * static_cast<std::size_t>(b));
            lab[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(idx)];
        }
        Tensor loss = diffusion_training_loss(fwd, x0, lab, sched, rng);
        double lv = loss.item();
        if (!std::isfinite(lv))
            throw std::runtime_error("train_denoiser: non-finite loss at step " +
                                     std::to_string(step));
        backward(loss);
        opt.step();
        zero_grads(params);
        losses.push_back(lv);
        if (log && (step % tc.log_every == 0 || step + 1 == tc.steps))
            (*log) << "step " << step << " loss " << lv << "\n";
    }
    return losses;
}

}  // namespace drcb
