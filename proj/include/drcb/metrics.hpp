#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcb {

// Rows are actual (intended) classes, columns are predicted classes.
struct ConfusionMatrix {
    int K = 0;
    std::vector<std::int64_t> counts;  // K*K row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : K(k), counts(static_cast<std::size_t>(k) * k, 0) {
        if (k < 1) throw std::invalid_argument("ConfusionMatrix: K must be >= 1");
    }

    std::int64_t& at(int actual, int predicted) {
        return counts[static_cast<std::size_t>(actual) * K + predicted];
    }
    std::int64_t at(int actual, int predicted) const {
        return counts[static_cast<std::size_t>(actual) * K + predicted];
    }

    std::int64_t row_sum(int i) const {
        std::int64_t s = 0;
        for (int j = 0; j < K; ++j) s += at(i, j);
        return s;
    }
    std::int64_t col_sum(int j) const {
        std::int64_t s = 0;
        for (int i = 0; i < K; ++i) s += at(i, j);
        return s;
    }
    std::int64_t total() const {
        std::int64_t s = 0;
        for (std::int64_t c : counts) s += c;
        return s;
    }
    std::int64_t trace() const {
        std::int64_t s = 0;
        for (int i = 0; i < K; ++i) s += at(i, i);
        return s;
    }
    double accuracy() const {
        std::int64_t t = total();
        if (t == 0) throw std::invalid_argument("ConfusionMatrix::accuracy: empty matrix");
        return static_cast<double>(trace()) / static_cast<double>(t);
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& actual, const std::vector<int>& predicted,
                                 int K) {
    if (actual.size() != predicted.size())
        throw std::invalid_argument("confusion: label arrays differ in length");
    ConfusionMatrix m(K);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        int a = actual[i], p = predicted[i];
        if (a < 0 || a >= K || p < 0 || p >= K)
            throw std::invalid_argument("confusion: label (" + std::to_string(a) + "," +
                                        std::to_string(p) + ") outside [0," + std::to_string(K) + ")");
        ++m.at(a, p);
    }
    return m;
}

// A metric cell whose denominator can vanish. Undefined cells are excluded
// from aggregates rather than treated as zero.
struct MetricCell {
    double value = 0.0;
    bool defined = false;
};

struct ClassPRF1 {
    MetricCell precision, recall, f1;
    std::int64_t support = 0;  // row sum
};

struct PRF1Summary {
    std::vector<ClassPRF1> per_class;
    double accuracy = 0.0;  // == micro recall == trace/total
    MetricCell macro_precision, macro_recall, macro_f1;
    MetricCell weighted_precision, weighted_recall, weighted_f1;  // support-weighted
};

inline PRF1Summary prf1(const ConfusionMatrix& m) {
    PRF1Summary s;
    s.per_class.resize(static_cast<std::size_t>(m.K));
    s.accuracy = m.accuracy();
    double mp = 0, mr = 0, mf = 0, wp = 0, wr = 0, wf = 0;
    std::int64_t np = 0, nr = 0, nf = 0, wps = 0, wrs = 0, wfs = 0;
    for (int c = 0; c < m.K; ++c) {
        ClassPRF1& pc = s.per_class[static_cast<std::size_t>(c)];
        std::int64_t col = m.col_sum(c), row = m.row_sum(c), diag = m.at(c, c);
        pc.support = row;
        if (col > 0) {
            pc.precision = {static_cast<double>(diag) / col, true};
            mp += pc.precision.value;
            wp += pc.precision.value * row;
            ++np;
            wps += row;
        }
        if (row > 0) {
            pc.recall = {static_cast<double>(diag) / row, true};
            mr += pc.recall.value;
            wr += pc.recall.value * row;
            ++nr;
            wrs += row;
        }
        if (pc.precision.defined && pc.recall.defined &&
            pc.precision.value + pc.recall.value > 0.0) {
            double f = 2.0 * pc.precision.value * pc.recall.value /
                       (pc.precision.value + pc.recall.value);
            pc.f1 = {f, true};
            mf += f;
            wf += f * row;
            ++nf;
            wfs += row;
        }
    }
    if (np) s.macro_precision = {mp / np, true};
    if (nr) s.macro_recall = {mr / nr, true};
    if (nf) s.macro_f1 = {mf / nf, true};
    if (wps) s.weighted_precision = {wp / wps, true};
    if (wrs) s.weighted_recall = {wr / wrs, true};
    if (wfs) s.weighted_f1 = {wf / wfs, true};
    return s;
}

// Relative classification accuracy: generated-sample accuracy normalized by
// the judge's accuracy on real data. Can exceed 1.
inline double rca(double acc_gen, double acc_real) {
    if (acc_gen < 0.0 || acc_gen > 1.0 || acc_real < 0.0 || acc_real > 1.0)
        throw std::invalid_argument("rca: accuracies must be in [0,1]");
    if (acc_real == 0.0) throw std::invalid_argument("rca: undefined baseline (acc_real == 0)");
    return acc_gen / acc_real;
}

inline MetricCell class_relative_recall(double gen_recall, double real_recall) {
    if (gen_recall < 0.0 || real_recall < 0.0)
        throw std::invalid_argument("class_relative_recall: recalls must be >= 0");
    if (real_recall == 0.0) return {0.0, false};
    return {gen_recall / real_recall, true};
}

}  // namespace drcb
