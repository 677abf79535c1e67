#include <catch2/catch_amalgamated.hpp>

#include "drcb/frechet.hpp"
#include "drcb/rng.hpp"
#include "drcb/scores.hpp"

using namespace drcb;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_spd(int d, Rng& r) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = r.normal();
    return m.transpose() * m + Eigen::MatrixXd::Identity(d, d);
}

Tensor features_from(const std::vector<std::vector<double>>& rows) {
    int n = static_cast<int>(rows.size());
    int d = static_cast<int>(rows[0].size());
    Tensor t({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            t.raw()[static_cast<std::size_t>(i) * d + j] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return t;
}

}  // namespace

TEST_CASE("gaussian stats of two identical rows have zero covariance") {
    GaussianStats g = gaussian_stats(features_from({{1.0, -2.0}, {1.0, -2.0}}));
    REQUIRE(g.n == 2);
    REQUIRE(g.mu(0) == 1.0);
    REQUIRE(g.mu(1) == -2.0);
    REQUIRE(g.sigma.norm() == 0.0);
}

TEST_CASE("gaussian stats of {0,2} give mean 1 and unbiased variance 2") {
    GaussianStats g = gaussian_stats(features_from({{0.0}, {2.0}}));
    REQUIRE(g.mu(0) == Approx(1.0));
    REQUIRE(g.sigma(0, 0) == Approx(2.0));
}

TEST_CASE("gaussian stats match a brute-force two-pass oracle on a random 5-D batch") {
    Rng r = Rng::stream(1, 0);
    const int n = 40, d = 5;
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& row : rows)
        for (auto& v : row) v = r.uniform(-3.0, 3.0);
    GaussianStats g = gaussian_stats(features_from(rows));

    std::vector<double> mu(d, 0.0);
    for (const auto& row : rows)
        for (int j = 0; j < d; ++j) mu[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
    for (auto& v : mu) v /= n;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double s = 0;
            for (const auto& row : rows)
                s += (row[static_cast<std::size_t>(a)] - mu[static_cast<std::size_t>(a)]) *
                     (row[static_cast<std::size_t>(b)] - mu[static_cast<std::size_t>(b)]);
            s /= (n - 1);
            REQUIRE(g.sigma(a, b) == Approx(s).margin(1e-12));
        }
    for (int j = 0; j < d; ++j) REQUIRE(g.mu(j) == Approx(mu[static_cast<std::size_t>(j)]).margin(1e-12));
    // symmetry enforced exactly
    REQUIRE((g.sigma - g.sigma.transpose()).norm() == 0.0);
}

TEST_CASE("gaussian stats need at least two rows") {
    REQUIRE_THROWS_AS(gaussian_stats(features_from({{1.0, 2.0}})), std::invalid_argument);
}

TEST_CASE("matrix square root of identity and of a diagonal") {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    REQUIRE((sqrtm_psd(I) - I).norm() == Approx(0.0).margin(1e-14));

    Eigen::MatrixXd d(2, 2);
    d << 4, 0, 0, 9;
    Eigen::MatrixXd s = sqrtm_psd(d);
    REQUIRE(s(0, 0) == Approx(2.0).margin(1e-12));
    REQUIRE(s(1, 1) == Approx(3.0).margin(1e-12));
    REQUIRE(s(0, 1) == Approx(0.0).margin(1e-12));
}

TEST_CASE("matrix square root residual under 1e-8 on 100 random SPD matrices") {
    Rng r = Rng::stream(2, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int d = 2 + r.uniform_int(6);
        Eigen::MatrixXd a = random_spd(d, r);
        Eigen::MatrixXd s = sqrtm_psd(a);
        double rel = (s * s - a).norm() / a.norm();
        REQUIRE(rel < 1e-8);
        REQUIRE((s - s.transpose()).norm() < 1e-10);  // result stays symmetric
    }
}

TEST_CASE("iterative square root agrees with the eigendecomposition path") {
    // two independent algorithms; agreement guards against a shared bug
    Rng r = Rng::stream(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd a = random_spd(4, r);
        Eigen::MatrixXd se = sqrtm_psd(a);
        Eigen::MatrixXd sn = sqrtm_newton_schulz(a);
        REQUIRE((se - sn).norm() / se.norm() < 1e-8);
    }
}

TEST_CASE("sqrtm rejects visibly asymmetric input") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0.5, -0.5, 1;
    REQUIRE_THROWS_AS(sqrtm_psd(a), std::invalid_argument);
}

TEST_CASE("frechet distance of identical stats is zero") {
    Rng r = Rng::stream(4, 0);
    GaussianStats g;
    g.mu = Eigen::VectorXd::Random(3);
    g.sigma = random_spd(3, r);
    g.n = 10;
    REQUIRE(frechet_distance(g, g) == Approx(0.0).margin(1e-9));
}

TEST_CASE("frechet distance analytic case: I versus 4I in two dimensions") {
    GaussianStats a, b;
    a.mu = Eigen::VectorXd::Zero(2);
    b.mu = Eigen::VectorXd::Zero(2);
    a.sigma = Eigen::MatrixXd::Identity(2, 2);
    b.sigma = 4.0 * Eigen::MatrixXd::Identity(2, 2);
    a.n = b.n = 10;
    // Tr(I + 4I - 2*sqrt(4I)) = Tr(5I - 4I) = 2
    REQUIRE(frechet_distance(a, b) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("frechet distance matches the diagonal closed form on 100 random cases") {
    Rng r = Rng::stream(5, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int d = 1 + r.uniform_int(8);
        GaussianStats a, b;
        a.mu = Eigen::VectorXd(d);
        b.mu = Eigen::VectorXd(d);
        a.sigma = Eigen::MatrixXd::Zero(d, d);
        b.sigma = Eigen::MatrixXd::Zero(d, d);
        a.n = b.n = 10;
        double want = 0;
        for (int i = 0; i < d; ++i) {
            double ma = r.uniform(-2.0, 2.0), mb = r.uniform(-2.0, 2.0);
            double va = r.uniform(0.1, 3.0), vb = r.uniform(0.1, 3.0);
            a.mu(i) = ma;
            b.mu(i) = mb;
            a.sigma(i, i) = va;
            b.sigma(i, i) = vb;
            want += (ma - mb) * (ma - mb) + (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb));
        }
        double got = frechet_distance(a, b);
        REQUIRE(got == Approx(want).margin(1e-9));
    }
}

TEST_CASE("frechet distance is symmetric and non-negative on random stats") {
    Rng r = Rng::stream(6, 0);
    for (int trial = 0; trial < 20; ++trial) {
        GaussianStats a, b;
        a.mu = Eigen::VectorXd::Random(4);
        b.mu = Eigen::VectorXd::Random(4);
        a.sigma = random_spd(4, r);
        b.sigma = random_spd(4, r);
        a.n = b.n = 10;
        double ab = frechet_distance(a, b);
        double ba = frechet_distance(b, a);
        REQUIRE(ab >= 0.0);
        REQUIRE(ab == Approx(ba).margin(1e-9));
    }
}

TEST_CASE("frechet distance rejects mismatched dimensions") {
    GaussianStats a, b;
    a.mu = Eigen::VectorXd::Zero(2);
    a.sigma = Eigen::MatrixXd::Identity(2, 2);
    b.mu = Eigen::VectorXd::Zero(3);
    b.sigma = Eigen::MatrixXd::Identity(3, 3);
    a.n = b.n = 5;
    REQUIRE_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
}

TEST_CASE("uniform posteriors score an IS of exactly 1") {
    const int n = 40, K = 5;
    Tensor post({n, K});
    std::fill(post.data().begin(), post.data().end(), 1.0 / K);
    SplitScore s = inception_score_analog(post, 10);
    REQUIRE(s.mean == Approx(1.0).epsilon(1e-12));
    REQUIRE(s.stddev == Approx(0.0).margin(1e-12));
}

TEST_CASE("one-hot posteriors covering K classes uniformly score exactly K") {
    const int K = 4, per = 10, n = K * per;
    Tensor post({n, K});
    // interleave classes so every contiguous split keeps a uniform marginal
    for (int i = 0; i < n; ++i) post.raw()[static_cast<std::size_t>(i) * K + (i % K)] = 1.0;
    SplitScore s = inception_score_analog(post, 10);
    REQUIRE(s.mean == Approx(static_cast<double>(K)).epsilon(1e-12));
}

TEST_CASE("IS matches a direct-summation oracle on random posteriors") {
    Rng r = Rng::stream(7, 0);
    const int n = 50, K = 3, splits = 10;
    Tensor post({n, K});
    for (int i = 0; i < n; ++i) {
        double z = 0;
        std::vector<double> row(K);
        for (int k = 0; k < K; ++k) {
            row[static_cast<std::size_t>(k)] = -std::log(1.0 - r.uniform());
            z += row[static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < K; ++k) post.raw()[static_cast<std::size_t>(i) * K + k] = row[static_cast<std::size_t>(k)] / z;
    }
    SplitScore s = inception_score_analog(post, splits);

    // direct recomputation with plain loops
    std::vector<double> vals;
    int chunk = n / splits;
    for (int sp = 0; sp < splits; ++sp) {
        int lo = sp * chunk, hi = (sp == splits - 1) ? n : lo + chunk;
        std::vector<double> marg(K, 0.0);
        for (int i = lo; i < hi; ++i)
            for (int k = 0; k < K; ++k) marg[static_cast<std::size_t>(k)] += post.raw()[static_cast<std::size_t>(i) * K + k];
        for (auto& v : marg) v /= (hi - lo);
        double kl = 0;
        for (int i = lo; i < hi; ++i)
            for (int k = 0; k < K; ++k) {
                double p = post.raw()[static_cast<std::size_t>(i) * K + k];
                if (p > 0) kl += p * std::log(p / marg[static_cast<std::size_t>(k)]);
            }
        vals.push_back(std::exp(kl / (hi - lo)));
    }
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    REQUIRE(s.mean == Approx(mean).margin(1e-12));
    REQUIRE(s.per_split.size() == splits);
    REQUIRE(s.mean >= 1.0 - 1e-12);
    REQUIRE(s.mean <= K + 1e-12);
}

TEST_CASE("IS rejects rows that do not sum to one") {
    Tensor post({2, 2});
    post.raw()[0] = 0.7;
    post.raw()[1] = 0.7;
    post.raw()[2] = 0.5;
    post.raw()[3] = 0.5;
    REQUIRE_THROWS_AS(inception_score_analog(post, 2), std::invalid_argument);
}

TEST_CASE("identical samples have zero diversity, antipodal unit vectors have one") {
    Tensor same({4, 3});
    for (int i = 0; i < 4; ++i) {
        same.raw()[static_cast<std::size_t>(i) * 3 + 0] = 0.6;
        same.raw()[static_cast<std::size_t>(i) * 3 + 1] = -0.8;
    }
    Rng r1 = Rng::stream(8, 0);
    DiversityScore d0 = feature_diversity(same, 100, r1);
    REQUIRE(d0.score == Approx(0.0).margin(1e-12));
    REQUIRE_FALSE(d0.degenerate);

    Tensor anti({2, 2});
    anti.raw()[0] = 1.0;
    anti.raw()[2] = -1.0;
    Rng r2 = Rng::stream(9, 0);
    DiversityScore d1 = feature_diversity(anti, 50, r2);
    REQUIRE(d1.score == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampled diversity matches the exhaustive mean within three sigma") {
    Rng gen = Rng::stream(10, 0);
    const int n = 30, d = 4;
    Tensor feats({n, d});
    for (int i = 0; i < n; ++i) {
        // two clusters offset in the first coordinate
        double base = (i % 2 == 0) ? 2.0 : -2.0;
        feats.raw()[static_cast<std::size_t>(i) * d] = base + 0.2 * gen.normal();
        for (int j = 1; j < d; ++j)
            feats.raw()[static_cast<std::size_t>(i) * d + j] = 0.3 * gen.normal();
    }
    // exhaustive over all ordered pairs i != j
    auto norm_dist = [&](int i, int j) {
        double ni = 0, nj = 0;
        for (int k = 0; k < d; ++k) {
            ni += feats.raw()[static_cast<std::size_t>(i) * d + k] * feats.raw()[static_cast<std::size_t>(i) * d + k];
            nj += feats.raw()[static_cast<std::size_t>(j) * d + k] * feats.raw()[static_cast<std::size_t>(j) * d + k];
        }
        ni = std::sqrt(ni);
        nj = std::sqrt(nj);
        double s = 0;
        for (int k = 0; k < d; ++k) {
            double diff = feats.raw()[static_cast<std::size_t>(i) * d + k] / ni -
                          feats.raw()[static_cast<std::size_t>(j) * d + k] / nj;
            s += diff * diff;
        }
        return std::sqrt(s) / 2.0;
    };
    double mean = 0, m2 = 0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) {
                double v = norm_dist(i, j);
                mean += v;
                m2 += v * v;
                ++cnt;
            }
    mean /= cnt;
    double var = m2 / cnt - mean * mean;

    const int pairs = 1000;
    Rng r = Rng::stream(11, 0);
    DiversityScore got = feature_diversity(feats, pairs, r);
    double sigma = std::sqrt(var / pairs);
    REQUIRE(std::fabs(got.score - mean) <= 3.0 * sigma + 1e-12);
}

TEST_CASE("all-zero feature rows are flagged degenerate and skipped") {
    Tensor feats({3, 2});
    feats.raw()[0] = 1.0;   // row 0 fine
    feats.raw()[2] = 0.0;   // row 1 all zero
    feats.raw()[4] = -1.0;  // row 2 fine
    Rng r = Rng::stream(12, 0);
    DiversityScore d = feature_diversity(feats, 200, r);
    REQUIRE(d.degenerate);
    REQUIRE(d.score == Approx(1.0).epsilon(1e-12));  // only the antipodal pair counts
}

TEST_CASE("kahan summation keeps a long pathological sum exact") {
    // 1 + 1e-16 repeated: naive double accumulation loses every tiny term
    KahanSum ks;
    ks.add(1.0);
    for (int i = 0; i < 10000000; ++i) ks.add(1e-16);
    double naive = 1.0;
    for (int i = 0; i < 100; ++i) naive += 1e-16;
    REQUIRE(naive == 1.0);  // demonstrates the failure mode
    REQUIRE(ks.value() == Approx(1.0 + 1e-9).epsilon(1e-12));
}
