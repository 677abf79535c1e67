#pragma once

#include <json.hpp>

#include "drcb/checkpoint.hpp"
#include "drcb/metrics.hpp"
#include "drcb/nn.hpp"
#include "drcb/optim.hpp"
#include "drcb/rng.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

struct OracleConfig {
    std::vector<int> widths = {16, 32, 64};
    int blocks_per_stage = 2;
    int classes = 10;
    int resolution = 16;

    void validate() const {
        if (widths.empty() || blocks_per_stage < 1 || classes < 2)
            throw std::invalid_argument("OracleConfig: widths/blocks/classes invalid");
        int down = 1 << (static_cast<int>(widths.size()) - 1);
        if (resolution % down != 0 || resolution / down < 1)
            throw std::invalid_argument("OracleConfig: resolution " + std::to_string(resolution) +
                                        " incompatible with " + std::to_string(widths.size()) +
                                        " stages");
    }

    int feature_dim() const { return widths.back(); }
};

// conv-GN-ReLU-conv-GN residual unit; the stage's first block downsamples
// with stride 2 (projected skip).
struct OracleBlock {
    int cin = 0, cout = 0, stride = 1;
    Tensor conv1_w, conv1_b, gn1_g, gn1_b;
    Tensor conv2_w, conv2_b, gn2_g, gn2_b;
    Tensor skip_w, skip_b;

    void build(int cin_, int cout_, int stride_, Rng& rng) {
        cin = cin_;
        cout = cout_;
        stride = stride_;
        auto wt = [&rng](std::vector<int> shape, int fan_in) {
            double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
            return Tensor::uniform(std::move(shape), -b, b, rng, true);
        };
        auto zeros = [](std::vector<int> shape) { return Tensor(std::move(shape), true); };
        auto ones = [](std::vector<int> shape) {
            Tensor t(std::move(shape), true);
            std::fill(t.data().begin(), t.data().end(), 1.0);
            return t;
        };
        conv1_w = wt({cout, cin, 3, 3}, cin * 9);
        conv1_b = zeros({cout});
        gn1_g = ones({cout});
        gn1_b = zeros({cout});
        conv2_w = wt({cout, cout, 3, 3}, cout * 9);
        conv2_b = zeros({cout});
        gn2_g = ones({cout});
        gn2_b = zeros({cout});
        if (cin != cout || stride != 1) {
            skip_w = wt({cout, cin, 1, 1}, cin);
            skip_b = zeros({cout});
        }
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = relu(group_norm(conv2d(x, conv1_w, conv1_b, stride, 1), default_groups(cout),
                                   gn1_g, gn1_b));
        h = group_norm(conv2d(h, conv2_w, conv2_b, 1, 1), default_groups(cout), gn2_g, gn2_b);
        Tensor s = (cin == cout && stride == 1) ? x : conv2d(x, skip_w, skip_b, stride, 0);
        return relu(add(h, s));
    }

    void collect(const std::string& prefix, NamedTensors& out) const {
        out.emplace_back(prefix + ".conv1.w", conv1_w);
        out.emplace_back(prefix + ".conv1.b", conv1_b);
        out.emplace_back(prefix + ".gn1.g", gn1_g);
        out.emplace_back(prefix + ".gn1.b", gn1_b);
        out.emplace_back(prefix + ".conv2.w", conv2_w);
        out.emplace_back(prefix + ".conv2.b", conv2_b);
        out.emplace_back(prefix + ".gn2.g", gn2_g);
        out.emplace_back(prefix + ".gn2.b", gn2_b);
        if (skip_w.defined()) {
            out.emplace_back(prefix + ".skip.w", skip_w);
            out.emplace_back(prefix + ".skip.b", skip_b);
        }
    }
};

class Oracle {
public:
    explicit Oracle(const OracleConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        Rng rng = Rng::stream(seed, 0x04ac);
        // stride-1 stem, no pooling: full resolution enters stage 0
        double b = 1.0 / std::sqrt(27.0);
        stem_w_ = Tensor::uniform({cfg_.widths[0], 3, 3, 3}, -b, b, rng, true);
        stem_b_ = Tensor({cfg_.widths[0]}, true);
        int ch = cfg_.widths[0];
        for (std::size_t st = 0; st < cfg_.widths.size(); ++st) {
            std::vector<OracleBlock> stage;
            for (int blk = 0; blk < cfg_.blocks_per_stage; ++blk) {
                OracleBlock ob;
                int stride = (st > 0 && blk == 0) ? 2 : 1;
                ob.build(ch, cfg_.widths[st], stride, rng);
                ch = cfg_.widths[st];
                stage.push_back(std::move(ob));
            }
            stages_.push_back(std::move(stage));
        }
        double bf = 1.0 / std::sqrt(static_cast<double>(ch));
        fc_w_ = Tensor::uniform({ch, cfg_.classes}, -bf, bf, rng, true);
        fc_b_ = Tensor({cfg_.classes}, true);
    }

    const OracleConfig& config() const { return cfg_; }

    // Penultimate representation: global average pool of the last stage.
    Tensor features(const Tensor& x) const {
        if (x.ndim() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.resolution || x.dim(3) != cfg_.resolution)
            throw std::invalid_argument("Oracle::features: expected (B,3," +
                                        std::to_string(cfg_.resolution) + "," +
                                        std::to_string(cfg_.resolution) + "), got " +
                                        shape_str(x.shape()));
        Tensor h = conv2d(x, stem_w_, stem_b_, 1, 1);
        for (const auto& stage : stages_)
            for (const auto& blk : stage) h = blk.forward(h);
        return spatial_mean(h);
    }

    Tensor logits(const Tensor& x) const { return linear(features(x), fc_w_, fc_b_); }

    // Batched inference without tape buildup.
    Tensor infer_logits(const Tensor& images, int batch = 256) const {
        NoGradGuard ng;
        int n = images.dim(0);
        Tensor out({n, cfg_.classes});
        std::size_t per_in = images.numel() / static_cast<std::size_t>(n);
        for (int lo = 0; lo < n; lo += batch) {
            int m = std::min(batch, n - lo);
            Tensor chunk({m, images.dim(1), images.dim(2), images.dim(3)});
            std::copy_n(images.raw() + per_in * static_cast<std::size_t>(lo), per_in * m, chunk.raw());
            Tensor lg = logits(chunk);
            std::copy_n(lg.raw(), lg.numel(),
                        out.raw() + static_cast<std::size_t>(lo) * cfg_.classes);
        }
        return out;
    }

    Tensor infer_features(const Tensor& images, int batch = 256) const {
        NoGradGuard ng;
        int n = images.dim(0);
        Tensor out({n, cfg_.feature_dim()});
        std::size_t per_in = images.numel() / static_cast<std::size_t>(n);
        for (int lo = 0; lo < n; lo += batch) {
            int m = std::min(batch, n - lo);
            Tensor chunk({m, images.dim(1), images.dim(2), images.dim(3)});
            std::copy_n(images.raw() + per_in * static_cast<std::size_t>(lo), per_in * m, chunk.raw());
            Tensor f = features(chunk);
            std::copy_n(f.raw(), f.numel(),
                        out.raw() + static_cast<std::size_t>(lo) * cfg_.feature_dim());
        }
        return out;
    }

    std::vector<int> classify(const Tensor& images, int batch = 256) const {
        Tensor lg = infer_logits(images, batch);
        std::vector<int> pred(static_cast<std::size_t>(lg.dim(0)));
        for (int i = 0; i < lg.dim(0); ++i) {
            const double* row = lg.raw() + static_cast<std::size_t>(i) * cfg_.classes;
            int best = 0;
            for (int c = 1; c < cfg_.classes; ++c)
                if (row[c] > row[best]) best = c;
            pred[static_cast<std::size_t>(i)] = best;
        }
        return pred;
    }

    double accuracy_on(const Tensor& images, const std::vector<int>& labels) const {
        return confusion(labels, classify(images), cfg_.classes).accuracy();
    }

    NamedTensors parameters() const {
        NamedTensors out;
        out.emplace_back("stem.w", stem_w_);
        out.emplace_back("stem.b", stem_b_);
        for (std::size_t st = 0; st < stages_.size(); ++st)
            for (std::size_t blk = 0; blk < stages_[st].size(); ++blk)
                stages_[st][blk].collect(
                    "s" + std::to_string(st) + ".b" + std::to_string(blk), out);
        out.emplace_back("fc.w", fc_w_);
        out.emplace_back("fc.b", fc_b_);
        return out;
    }

    void load_values(const Checkpoint& ck) {
        for (auto& [name, p] : parameters()) {
            const Tensor& src = ck.at(name);
            if (src.shape() != p.shape())
                throw std::runtime_error("Oracle::load_values: shape mismatch for " + name);
            Tensor dst = p;
            std::copy(src.raw(), src.raw() + src.numel(), dst.raw());
        }
    }

    void copy_values_from(const std::vector<std::vector<double>>& snap) {
        NamedTensors ps = parameters();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i].second.data() = snap[i];
    }

    std::vector<std::vector<double>> snapshot_values() const {
        std::vector<std::vector<double>> snap;
        for (auto& [name, p] : parameters()) snap.push_back(p.data());
        return snap;
    }

    void save(const std::string& path, const json& extra_meta = json::object()) const {
        json meta = extra_meta;
        meta["kind"] = "oracle";
        meta["config"] = {{"widths", cfg_.widths},
                          {"blocks_per_stage", cfg_.blocks_per_stage},
                          {"classes", cfg_.classes},
                          {"resolution", cfg_.resolution}};
        save_checkpoint(path, parameters(), meta);
    }

    static Oracle load(const std::string& path, json* meta_out = nullptr) {
        Checkpoint ck = load_checkpoint(path);
        if (ck.meta.value("kind", "") != "oracle")
            throw std::runtime_error("Oracle::load: " + path + " is not an oracle checkpoint");
        const json& c = ck.meta.at("config");
        OracleConfig cfg;
        cfg.widths = c.at("widths").get<std::vector<int>>();
        cfg.blocks_per_stage = c.at("blocks_per_stage").get<int>();
        cfg.classes = c.at("classes").get<int>();
        cfg.resolution = c.at("resolution").get<int>();
        Oracle o(cfg, 0);
        o.load_values(ck);
        if (meta_out) *meta_out = ck.meta;
        return o;
    }

private:
    OracleConfig cfg_;
    Tensor stem_w_, stem_b_;
    std::vector<std::vector<OracleBlock>> stages_;
    Tensor fc_w_, fc_b_;
};

struct OracleTrainConfig {
    int steps = 1200;
    int batch = 32;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int eval_every = 100;
    std::uint64_t seed = 0;
};

struct OracleTrainResult {
    double test_accuracy = 0.0;  // of the selected (best) parameters
    int best_step = -1;
    std::vector<double> losses;
    json metadata;
};

// Single-phase training with periodic held-out evaluation; the returned model
// carries the best-test-accuracy parameters, not the last ones.
inline OracleTrainResult train_oracle(Oracle& model, const Tensor& train_images,
                                      const std::vector<int>& train_labels, const Tensor& test_images,
                                      const std::vector<int>& test_labels,
                                      const OracleTrainConfig& tc, std::ostream* log = nullptr) {
    if (!train_images.defined() || train_images.dim(0) == 0)
        throw std::invalid_argument("train_oracle: empty dataset");
    int N = train_images.dim(0);
    std::size_t per = train_images.numel() / static_cast<std::size_t>(N);

    std::vector<Tensor> params;
    for (auto& [name, p] : model.parameters()) params.push_back(p);
    AdamWConfig oc;
    oc.lr = tc.lr;
    oc.weight_decay = tc.weight_decay;
    AdamW opt(params, oc);

    Rng rng = Rng::stream(tc.seed, 0x04ac + 1);
    OracleTrainResult res;
    auto best = model.snapshot_values();
    double best_acc = -1.0;
    for (int step = 0; step < tc.steps; ++step) {
        Tensor x({tc.batch, 3, train_images.dim(2), train_images.dim(3)});
        std::vector<int> lab(static_cast<std::size_t>(tc.batch));
        for (int b = 0; b < tc.batch; ++b) {
            int idx = rng.uniform_int(N);
            std::copy_n(train_images.raw() + per * static_cast<std::size_t>(idx), per,
                        x.raw() + per * static_cast<std::size_t>(b));
            lab[static_cast<std::size_t>(b)] = train_labels[static_cast<std::size_t>(idx)];
        }
        Tensor loss = cross_entropy_logits(model.logits(x), lab);
        double lv = loss.item();
        if (!std::isfinite(lv))
            throw std::runtime_error("train_oracle: non-finite loss at step " + std::to_string(step));
        backward(loss);
        opt.step();
        zero_grads(params);
        res.losses.push_back(lv);

        if ((step + 1) % tc.eval_every == 0 || step + 1 == tc.steps) {
            double acc = model.accuracy_on(test_images, test_labels);
            if (acc > best_acc) {
                best_acc = acc;
                best = model.snapshot_values();
                res.best_step = step + 1;
            }
            if (log) (*log) << "step " << step + 1 << " loss " << lv << " test_acc " << acc << "\n";
        }
    }
    model.copy_values_from(best);
    res.test_accuracy = best_acc;
    res.metadata = {{"seed", tc.seed},
                    {"steps", tc.steps},
                    {"best_step", res.best_step},
                    {"test_accuracy", best_acc}};
    return res;
}

}  // namespace drcb
