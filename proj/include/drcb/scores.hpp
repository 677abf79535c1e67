#pragma once

#include "drcb/frechet.hpp"
#include "drcb/rng.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

struct SplitScore {
    double mean = 0.0;
    double stddev = 0.0;  // sample std over splits
    std::vector<double> per_split;
};

// exp(E_x KL(p(y|x) || p(y))) per split; p(y) is the split marginal.
// Posterior rows must already be normalized.
inline SplitScore inception_score_analog(const Tensor& posteriors, int splits = 10) {
    if (posteriors.ndim() != 2)
        throw std::invalid_argument("inception_score_analog: expected (N,K) posteriors, got " +
                                    shape_str(posteriors.shape()));
    int n = posteriors.dim(0), k = posteriors.dim(1);
    if (splits < 1 || n < splits)
        throw std::invalid_argument("inception_score_analog: need n >= splits >= 1");
    for (int i = 0; i < n; ++i) {
        KahanSum row;
        for (int j = 0; j < k; ++j) {
            double p = posteriors.raw()[static_cast<std::size_t>(i) * k + j];
            if (p < 0.0)
                throw std::invalid_argument("inception_score_analog: negative posterior entry");
            row.add(p);
        }
        if (std::abs(row.value() - 1.0) > 1e-8)
            throw std::invalid_argument("inception_score_analog: row " + std::to_string(i) +
                                        " sums to " + std::to_string(row.value()) + ", not 1");
    }

    SplitScore out;
    for (int s = 0; s < splits; ++s) {
        int lo = static_cast<int>(static_cast<std::int64_t>(n) * s / splits);
        int hi = static_cast<int>(static_cast<std::int64_t>(n) * (s + 1) / splits);
        int m = hi - lo;
        std::vector<double> marginal(static_cast<std::size_t>(k), 0.0);
        for (int j = 0; j < k; ++j) {
            KahanSum col;
            for (int i = lo; i < hi; ++i)
                col.add(posteriors.raw()[static_cast<std::size_t>(i) * k + j]);
            marginal[static_cast<std::size_t>(j)] = col.value() / m;
        }
        KahanSum kl_sum;
        for (int i = lo; i < hi; ++i)
            for (int j = 0; j < k; ++j) {
                double p = posteriors.raw()[static_cast<std::size_t>(i) * k + j];
                if (p > 0.0) kl_sum.add(p * std::log(p / marginal[static_cast<std::size_t>(j)]));
            }
        out.per_split.push_back(std::exp(kl_sum.value() / m));
    }
    KahanSum ms;
    for (double v : out.per_split) ms.add(v);
    out.mean = ms.value() / splits;
    KahanSum vs;
    for (double v : out.per_split) vs.add((v - out.mean) * (v - out.mean));
    out.stddev = splits > 1 ? std::sqrt(vs.value() / (splits - 1)) : 0.0;
    return out;
}

struct DiversityScore {
    double score = 0.0;
    bool degenerate = false;  // an all-zero feature vector was drawn
};

// Mean over sampled pairs of d(u,v) = ||u/||u|| - v/||v|||| / 2, in [0,1].
inline DiversityScore feature_diversity(const Tensor& features, int pairs, Rng& rng) {
    if (features.ndim() != 2)
        throw std::invalid_argument("feature_diversity: expected (N,D) features, got " +
                                    shape_str(features.shape()));
    int n = features.dim(0), d = features.dim(1);
    if (n < 2) throw std::invalid_argument("feature_diversity: need >= 2 samples, got " +
                                           std::to_string(n));
    DiversityScore out;
    auto norm_of = [&](int i) {
        KahanSum s;
        const double* row = features.raw() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) s.add(row[j] * row[j]);
        return std::sqrt(s.value());
    };
    KahanSum acc;
    int counted = 0;
    for (int p = 0; p < pairs; ++p) {
        int i = rng.uniform_int(n);
        int j = rng.uniform_int(n - 1);
        if (j >= i) ++j;
        double ni = norm_of(i), nj = norm_of(j);
        if (ni == 0.0 || nj == 0.0) {
            out.degenerate = true;  // skipped pair, excluded from the mean
            continue;
        }
        const double* u = features.raw() + static_cast<std::size_t>(i) * d;
        const double* v = features.raw() + static_cast<std::size_t>(j) * d;
        KahanSum dist;
        for (int c = 0; c < d; ++c) {
            double t = u[c] / ni - v[c] / nj;
            dist.add(t * t);
        }
        acc.add(std::sqrt(dist.value()) / 2.0);
        ++counted;
    }
    out.score = counted > 0 ? acc.value() / counted : 0.0;
    return out;
}

}  // namespace drcb
