#pragma once

#include <cstdio>
#include <functional>

#include <json.hpp>

#include "drcb/image.hpp"
#include "drcb/rng.hpp"
#include "drcb/schedule.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

// A noise predictor maps (x_t, t, class labels) -> predicted epsilon, same
// shape as x_t. t and labels are per batch row.
using EpsPredictor =
    std::function<Tensor(const Tensor& xt, const std::vector<int>& t, const std::vector<int>& labels)>;

// Closed-form forward corruption: x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps.
inline Tensor q_sample(const Tensor& x0, const std::vector<int>& t, const Tensor& eps,
                       const NoiseSchedule& sched) {
    if (x0.ndim() != 4 || eps.ndim() != 4 || x0.shape() != eps.shape())
        throw std::invalid_argument("q_sample: x0/eps must be matching (B,C,H,W)");
    int B = x0.dim(0);
    if (static_cast<int>(t.size()) != B)
        throw std::invalid_argument("q_sample: t size " + std::to_string(t.size()) +
                                    " != batch " + std::to_string(B));
    std::size_t per = x0.numel() / static_cast<std::size_t>(B);
    Tensor out(x0.shape());
    for (int b = 0; b < B; ++b) {
        int tb = t[static_cast<std::size_t>(b)];
        if (tb < 1 || tb > sched.T)
            throw std::invalid_argument("q_sample: t=" + std::to_string(tb) + " outside 1.." +
                                        std::to_string(sched.T));
        double ab = sched.alpha_bar(tb);
        double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
        const double* px = x0.raw() + per * static_cast<std::size_t>(b);
        const double* pe = eps.raw() + per * static_cast<std::size_t>(b);
        double* po = out.raw() + per * static_cast<std::size_t>(b);
        for (std::size_t i = 0; i < per; ++i) po[i] = c0 * px[i] + c1 * pe[i];
    }
    return out;
}

// One optimization target draw: uniform t per row, fresh Gaussian noise,
// unweighted epsilon-MSE.
inline Tensor diffusion_training_loss(const EpsPredictor& model, const Tensor& x0,
                                      const std::vector<int>& labels, const NoiseSchedule& sched,
                                      Rng& rng) {
    int B = x0.dim(0);
    std::vector<int> t(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) t[static_cast<std::size_t>(b)] = 1 + rng.uniform_int(sched.T);
    Tensor eps(x0.shape());
    for (std::size_t i = 0; i < eps.numel(); ++i) eps.raw()[i] = rng.normal();
    Tensor xt = q_sample(x0, t, eps, sched);
    Tensor pred = model(xt, t, labels);
    return mse_loss(pred, eps);
}

enum class SamplerVariance { posterior, beta };

struct SampleOpts {
    SamplerVariance variance = SamplerVariance::posterior;
    bool deterministic = false;  // z = 0 at every step
    bool clamp_final = true;
    int batch_size = 64;
};

// One reverse transition given the model output. z must be zeros at t = 1.
inline void p_sample_step_inplace(double* x, const double* eps, std::size_t n, int t,
                                  const NoiseSchedule& sched, const double* z, const SampleOpts& opts) {
    double b = sched.beta(t);
    double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha(t));
    double coef = b / std::sqrt(1.0 - sched.alpha_bar(t));
    double var = opts.variance == SamplerVariance::posterior ? sched.posterior_var(t) : b;
    double sigma = (t > 1 && !opts.deterministic) ? std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < n; ++i)
        x[i] = inv_sqrt_a * (x[i] - coef * eps[i]) + (sigma != 0.0 ? sigma * z[i] : 0.0);
}

// Tensor wrapper for single-batch step tests.
inline Tensor p_sample_step(const Tensor& xt, const Tensor& eps, int t, const NoiseSchedule& sched,
                            const Tensor& z, const SampleOpts& opts = {}) {
    if (xt.shape() != eps.shape() || xt.shape() != z.shape())
        throw std::invalid_argument("p_sample_step: shape mismatch");
    Tensor out = xt.clone();
    p_sample_step_inplace(out.raw(), eps.raw(), out.numel(), t, sched, z.raw(), opts);
    return out;
}

// Ancestral sampling. Every chain draws its noise from its own stream
// (keyed by chain index), so the output is independent of batch_size and of
// how chains are grouped. Intermediate states are left unclamped; only the
// final image is clipped to [-1,1].
inline Tensor sample_chains(const EpsPredictor& model, const NoiseSchedule& sched,
                            const std::vector<int>& labels, int C, int H, int W, std::uint64_t seed,
                            const SampleOpts& opts = {}) {
    int N = static_cast<int>(labels.size());
    std::size_t per = static_cast<std::size_t>(C) * H * W;
    Tensor out({N, C, H, W});
    NoGradGuard ng;
    std::vector<double> z(per);
    for (int start = 0; start < N; start += opts.batch_size) {
        int B = std::min(opts.batch_size, N - start);
        std::vector<Rng> streams;
        streams.reserve(static_cast<std::size_t>(B));
        Tensor x({B, C, H, W});
        for (int b = 0; b < B; ++b) {
            streams.push_back(Rng::stream(seed, 0xc4a1 + static_cast<std::uint64_t>(start + b)));
            double* px = x.raw() + per * static_cast<std::size_t>(b);
            for (std::size_t i = 0; i < per; ++i) px[i] = streams.back().normal();
        }
        std::vector<int> lab(labels.begin() + start, labels.begin() + start + B);
        for (int t = sched.T; t >= 1; --t) {
            std::vector<int> tv(static_cast<std::size_t>(B), t);
            Tensor eps = model(x, tv, lab);
            if (eps.shape() != x.shape())
                throw std::invalid_argument("sample_chains: model output " + shape_str(eps.shape()) +
                                            " != state " + shape_str(x.shape()));
            for (int b = 0; b < B; ++b) {
                bool noisy = t > 1 && !opts.deterministic;
                for (std::size_t i = 0; i < per; ++i)
                    z[i] = noisy ? streams[static_cast<std::size_t>(b)].normal() : 0.0;
                p_sample_step_inplace(x.raw() + per * static_cast<std::size_t>(b),
                                      eps.raw() + per * static_cast<std::size_t>(b), per, t, sched,
                                      z.data(), opts);
            }
        }
        for (int b = 0; b < B; ++b) {
            const double* px = x.raw() + per * static_cast<std::size_t>(b);
            double* po = out.raw() + per * static_cast<std::size_t>(start + b);
            for (std::size_t i = 0; i < per; ++i)
                po[i] = opts.clamp_final ? std::clamp(px[i], -1.0, 1.0) : px[i];
        }
    }
    return out;
}

// Sample dump: one PPM per image plus a manifest describing intent.
inline void write_sample_set(const std::string& dir, const Tensor& images,
                             const std::vector<int>& intended, std::uint64_t seed, int T) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["T"] = T;
    manifest["samples"] = nlohmann::json::array();
    std::vector<int> count(static_cast<std::size_t>(
                               1 + *std::max_element(intended.begin(), intended.end())),
                           0);
    for (int i = 0; i < images.dim(0); ++i) {
        int c = intended[static_cast<std::size_t>(i)];
        char name[64];
        std::snprintf(name, sizeof(name), "class%d_%d.ppm", c, count[static_cast<std::size_t>(c)]++);
        write_ppm((fs::path(dir) / name).string(), slice_image(images, i));
        manifest["samples"].push_back({{"path", name}, {"intended_label", c}});
    }
    write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

struct SampleSet {
    Tensor images;  // (N,3,H,W)
    std::vector<int> intended;
    std::uint64_t seed = 0;
    int T = 0;
};

inline SampleSet load_sample_set(const std::string& dir) {
    namespace fs = std::filesystem;
    nlohmann::json manifest = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
    SampleSet s;
    s.seed = manifest.at("seed").get<std::uint64_t>();
    s.T = manifest.at("T").get<int>();
    std::vector<Tensor> imgs;
    for (const auto& e : manifest.at("samples")) {
        imgs.push_back(read_ppm((fs::path(dir) / e.at("path").get<std::string>()).string()));
        s.intended.push_back(e.at("intended_label").get<int>());
    }
    if (imgs.empty()) throw std::runtime_error("load_sample_set: " + dir + " has no samples");
    s.images = stack_images(imgs);
    return s;
}

}  // namespace drcb
