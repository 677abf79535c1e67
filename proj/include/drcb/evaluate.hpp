#pragma once

#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "drcb/frechet.hpp"
#include "drcb/io.hpp"
#include "drcb/metrics.hpp"
#include "drcb/resnet.hpp"
#include "drcb/scores.hpp"

namespace drcb {

struct EvalOptions {
    int samples_per_class = 500;  // generation-time target, echoed into metadata
    int is_splits = 10;
    int diversity_pairs = 1000;
    std::uint64_t seed = 0;
};

struct EvalReport {
    int K = 0;
    ConfusionMatrix conf_real, conf_gen;
    PRF1Summary prf_real, prf_gen;
    double acc_real = 0.0, acc_gen = 0.0;
    double global_rca = 0.0;
    std::vector<MetricCell> class_rca;
    double frechet_score = 0.0;
    bool frechet_clipped = false;
    SplitScore is_analog;
    std::vector<DiversityScore> diversity_per_class;
    double diversity_avg = 0.0;
    json metadata;

    // The two report identities hold by construction; recheck before emitting.
    void validate() const {
        if (std::abs(global_rca - acc_gen / acc_real) > 1e-12)
            throw std::logic_error("EvalReport: global RCA != acc_gen/acc_real");
        for (int c = 0; c < K; ++c) {
            const MetricCell& cell = class_rca[static_cast<std::size_t>(c)];
            const MetricCell& rr = prf_real.per_class[static_cast<std::size_t>(c)].recall;
            const MetricCell& gr = prf_gen.per_class[static_cast<std::size_t>(c)].recall;
            if (!rr.defined || rr.value == 0.0) {
                if (cell.defined) throw std::logic_error("EvalReport: class RCA defined on zero base");
            } else if (gr.defined &&
                       std::abs(cell.value - gr.value / rr.value) > 1e-12) {
                throw std::logic_error("EvalReport: class RCA ratio identity violated");
            }
        }
    }
};

namespace detail_eval {

inline json cell_json(const MetricCell& c) {
    if (!c.defined) return json{{"defined", false}};
    return json{{"defined", true}, {"value", c.value}};
}

inline json prf_json(const PRF1Summary& s) {
    json per = json::array();
    for (const auto& pc : s.per_class)
        per.push_back({{"precision", cell_json(pc.precision)},
                       {"recall", cell_json(pc.recall)},
                       {"f1", cell_json(pc.f1)},
                       {"support", pc.support}});
    return json{{"per_class", per},
                {"accuracy", s.accuracy},
                {"macro_precision", cell_json(s.macro_precision)},
                {"macro_recall", cell_json(s.macro_recall)},
                {"macro_f1", cell_json(s.macro_f1)},
                {"weighted_precision", cell_json(s.weighted_precision)},
                {"weighted_recall", cell_json(s.weighted_recall)},
                {"weighted_f1", cell_json(s.weighted_f1)}};
}

inline json confusion_json(const ConfusionMatrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.K; ++i) {
        json row = json::array();
        for (int j = 0; j < m.K; ++j) row.push_back(m.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail_eval

inline json report_to_json(const EvalReport& r) {
    json j;
    j["classes"] = r.K;
    j["confusion_real"] = detail_eval::confusion_json(r.conf_real);
    j["confusion_generated"] = detail_eval::confusion_json(r.conf_gen);
    j["prf1_real"] = detail_eval::prf_json(r.prf_real);
    j["prf1_generated"] = detail_eval::prf_json(r.prf_gen);
    j["accuracy_real"] = r.acc_real;
    j["accuracy_generated"] = r.acc_gen;
    j["global_rca"] = r.global_rca;
    json crca = json::array();
    for (const auto& c : r.class_rca) crca.push_back(detail_eval::cell_json(c));
    j["class_rca"] = crca;
    j["oracle_fid"] = r.frechet_score;
    j["oracle_fid_clipped"] = r.frechet_clipped;
    j["is_analog"] = {{"mean", r.is_analog.mean},
                      {"std", r.is_analog.stddev},
                      {"per_split", r.is_analog.per_split}};
    json div = json::array();
    for (const auto& d : r.diversity_per_class)
        div.push_back({{"score", d.score}, {"degenerate", d.degenerate}});
    j["feature_diversity"] = {{"per_class", div}, {"average", r.diversity_avg}};
    j["metadata"] = r.metadata;
    return j;
}

inline std::string confusion_to_csv(const ConfusionMatrix& m) {
    std::string out = "actual\\predicted";
    for (int j = 0; j < m.K; ++j) out += "," + std::to_string(j);
    out += "\n";
    for (int i = 0; i < m.K; ++i) {
        out += std::to_string(i);
        for (int j = 0; j < m.K; ++j) out += "," + std::to_string(m.at(i, j));
        out += "\n";
    }
    return out;
}

// Per-class table: real P/R/F1, generated P/R/F1, class RCA.
inline std::string per_class_table_csv(const EvalReport& r) {
    auto cell = [](const MetricCell& c) {
        if (!c.defined) return std::string("undefined");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", c.value);
        return std::string(buf);
    };
    std::string out =
        "class,real_precision,real_recall,real_f1,gen_precision,gen_recall,gen_f1,class_rca\n";
    for (int c = 0; c < r.K; ++c) {
        const auto& rp = r.prf_real.per_class[static_cast<std::size_t>(c)];
        const auto& gp = r.prf_gen.per_class[static_cast<std::size_t>(c)];
        out += std::to_string(c) + "," + cell(rp.precision) + "," + cell(rp.recall) + "," +
               cell(rp.f1) + "," + cell(gp.precision) + "," + cell(gp.recall) + "," + cell(gp.f1) +
               "," + cell(r.class_rca[static_cast<std::size_t>(c)]) + "\n";
    }
    return out;
}

// Scores generated samples against their intended labels with the oracle and
// assembles every metric into one report.
inline EvalReport evaluate(const Oracle& oracle, const Tensor& real_images,
                           const std::vector<int>& real_labels, const Tensor& gen_images,
                           const std::vector<int>& gen_intended, const EvalOptions& opts = {}) {
    int K = oracle.config().classes;
    std::vector<int> gen_count(static_cast<std::size_t>(K), 0);
    for (int c : gen_intended) {
        if (c < 0 || c >= K)
            throw std::invalid_argument("evaluate: intended label " + std::to_string(c) +
                                        " outside [0," + std::to_string(K) + ")");
        ++gen_count[static_cast<std::size_t>(c)];
    }
    std::string missing;
    for (int c = 0; c < K; ++c)
        if (gen_count[static_cast<std::size_t>(c)] == 0) missing += (missing.empty() ? "" : ",") + std::to_string(c);
    if (!missing.empty())
        throw std::invalid_argument("evaluate: generated set missing classes {" + missing + "}");

    EvalReport r;
    r.K = K;
    r.conf_real = confusion(real_labels, oracle.classify(real_images), K);
    r.conf_gen = confusion(gen_intended, oracle.classify(gen_images), K);
    r.prf_real = prf1(r.conf_real);
    r.prf_gen = prf1(r.conf_gen);
    r.acc_real = r.conf_real.accuracy();
    r.acc_gen = r.conf_gen.accuracy();
    r.global_rca = rca(r.acc_gen, r.acc_real);
    for (int c = 0; c < K; ++c) {
        const MetricCell& rr = r.prf_real.per_class[static_cast<std::size_t>(c)].recall;
        const MetricCell& gr = r.prf_gen.per_class[static_cast<std::size_t>(c)].recall;
        if (!rr.defined || !gr.defined)
            r.class_rca.push_back({0.0, false});
        else
            r.class_rca.push_back(class_relative_recall(gr.value, rr.value));
    }

    Tensor feats_real = oracle.infer_features(real_images);
    Tensor feats_gen = oracle.infer_features(gen_images);
    r.frechet_score =
        frechet_distance(gaussian_stats(feats_real), gaussian_stats(feats_gen), &r.frechet_clipped);

    Tensor post;
    {
        NoGradGuard ng;
        post = softmax(oracle.infer_logits(gen_images), 1);
    }
    int n_gen = gen_images.dim(0);
    // Sample sets arrive class-ordered, which would make the contiguous score
    // splits class-pure and pin the score at 1 no matter how sharp the judge
    // is. Shuffle rows (deterministically in the eval seed) before splitting.
    {
        Rng srng = Rng::stream(opts.seed, 0x15a9);
        std::vector<int> order(static_cast<std::size_t>(n_gen));
        std::iota(order.begin(), order.end(), 0);
        for (int i = n_gen - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(srng.uniform_int(i + 1))]);
        Tensor shuffled({n_gen, K});
        for (int i = 0; i < n_gen; ++i)
            std::copy_n(post.raw() + static_cast<std::size_t>(order[static_cast<std::size_t>(i)]) * K,
                        K, shuffled.raw() + static_cast<std::size_t>(i) * K);
        post = std::move(shuffled);
    }
    r.is_analog = inception_score_analog(post, std::min(opts.is_splits, n_gen));

    int fd = oracle.config().feature_dim();
    KahanSum div_sum;
    for (int c = 0; c < K; ++c) {
        int nc = gen_count[static_cast<std::size_t>(c)];
        Tensor fc({nc, fd});
        int at = 0;
        for (int i = 0; i < n_gen; ++i)
            if (gen_intended[static_cast<std::size_t>(i)] == c)
                std::copy_n(feats_gen.raw() + static_cast<std::size_t>(i) * fd, fd,
                            fc.raw() + static_cast<std::size_t>(at++) * fd);
        if (nc < 2) {
            r.diversity_per_class.push_back({0.0, true});
            continue;
        }
        Rng rng = Rng::stream(opts.seed, 0xd1f0 + static_cast<std::uint64_t>(c));
        r.diversity_per_class.push_back(feature_diversity(fc, opts.diversity_pairs, rng));
        div_sum.add(r.diversity_per_class.back().score);
    }
    r.diversity_avg = div_sum.value() / K;

    r.metadata = {{"n_real", static_cast<int>(real_labels.size())},
                  {"n_generated", n_gen},
                  {"samples_per_class", opts.samples_per_class},
                  {"is_splits", std::min(opts.is_splits, n_gen)},
                  {"diversity_pairs", opts.diversity_pairs},
                  {"seed", opts.seed}};
    r.validate();
    return r;
}

// report.json plus the CSV side files.
inline void write_report(const std::string& dir, const EvalReport& r) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file_atomic((fs::path(dir) / "report.json").string(), report_to_json(r).dump(2) + "\n");
    write_file_atomic((fs::path(dir) / "confusion_real.csv").string(), confusion_to_csv(r.conf_real));
    write_file_atomic((fs::path(dir) / "confusion_generated.csv").string(),
                      confusion_to_csv(r.conf_gen));
    write_file_atomic((fs::path(dir) / "per_class.csv").string(), per_class_table_csv(r));
}

}  // namespace drcb
